fn main() {
    std::process::exit(radtrack::cli::main_with(std::env::args_os()));
}
