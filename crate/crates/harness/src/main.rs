fn main() {
    std::process::exit(fracfold_harness::cli::run(std::env::args_os()));
}
