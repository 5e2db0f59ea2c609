fn main() {
    std::process::exit(frog_core::cli::run(std::env::args_os()));
}
