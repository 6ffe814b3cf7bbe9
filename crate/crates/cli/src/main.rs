fn main() {
    std::process::exit(charsum_cli::run_cli(std::env::args_os()));
}
