fn main() {
    std::process::exit(isokal::cli::run(std::env::args_os()));
}
