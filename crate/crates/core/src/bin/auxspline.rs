fn main() {
    std::process::exit(auxspline::cli::run(std::env::args_os()));
}
