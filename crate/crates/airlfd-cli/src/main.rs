use std::process::ExitCode;

fn main() -> ExitCode {
    let code = airlfd_cli::main_with(std::env::args_os(), env_vars());
    ExitCode::from(code as u8)
}

fn env_vars() -> Vec<(String, String)> {
    std::env::vars_os()
        .filter_map(|(k, v)| Some((k.into_string().ok()?, v.into_string().ok()?)))
        .collect()
}
