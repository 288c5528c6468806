fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(wplap_harness::cli::run_cli(&args));
}
