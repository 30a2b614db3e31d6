fn main() {
    std::process::exit(branchstop::cli::main_with_args(std::env::args_os()));
}
