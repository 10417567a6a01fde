fn main() {
    std::process::exit(icscm::cli::run_from(std::env::args_os()));
}
