fn main() -> std::process::ExitCode {
    synet::cli::main()
}
