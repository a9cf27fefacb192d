fn main() -> std::process::ExitCode {
    qjz::cli::main()
}
