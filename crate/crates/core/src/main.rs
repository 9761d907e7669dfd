fn main() {
    std::process::exit(tsclust::cli::run(std::env::args_os()));
}
