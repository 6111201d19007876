fn main() {
    std::process::exit(wmbench::cli::run(std::env::args_os()));
}
