fn main() {
    std::process::exit(rigen::cli::run(std::env::args_os()));
}
