fn main() {
    std::process::exit(pcpa::cli::run(std::env::args_os()));
}
