fn main() {
    std::process::exit(foliate::cli::run_os(std::env::args_os()));
}
