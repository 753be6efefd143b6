fn main() {
    std::process::exit(templner::cli::main_with(std::env::args_os()));
}
