fn main() {
    std::process::exit(exit_transport::cli::run(std::env::args_os()));
}
