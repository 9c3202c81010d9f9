fn main() {
    std::process::exit(jumpset::cli::run(std::env::args_os()));
}
