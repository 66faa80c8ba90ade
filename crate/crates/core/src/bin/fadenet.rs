fn main() {
    std::process::exit(fadenet::cli::run(std::env::args_os()));
}
