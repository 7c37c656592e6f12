use coded_als_cli::{exit_code, parse_invocation, run};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = match parse_invocation(&args).and_then(|inv| run(&inv)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    };
    std::process::exit(code);
}
