fn main() {
    std::process::exit(monodual::cli::run(std::env::args_os()));
}
