fn main() {
    std::process::exit(ringmodes::cli::main_with_args(std::env::args_os()));
}
