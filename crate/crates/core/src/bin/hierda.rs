fn main() {
    std::process::exit(hierda::cli::run(std::env::args_os()));
}
