fn main() {
    std::process::exit(weakkam::cli::main_with_args(std::env::args_os()));
}
