fn main() {
    std::process::exit(nested_sinkhorn::cli::main_with_args(std::env::args_os()));
}
