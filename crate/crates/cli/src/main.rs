fn main() {
    std::process::exit(intonation_cli::run_from(std::env::args_os()));
}
