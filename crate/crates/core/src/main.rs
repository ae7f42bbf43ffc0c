fn main() {
    std::process::exit(anticomm::cli::run(std::env::args_os()));
}
