fn main() -> std::process::ExitCode {
    pgd_vhl_harness::cli::main_with(std::env::args_os())
}
