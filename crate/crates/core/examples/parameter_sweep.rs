//! A (b, c) sweep through the command-line runner, written to a temporary
//! directory and summarized from `results.jsonl`.

fn main() {
    let out = std::env::temp_dir().join("lvsync-sweep-example");
    let code = lvsync::cli::run([
        "lvsync",
        "sweep",
        "--n",
        "100",
        "--sweep-b",
        "0.1:0.9:0.1",
        "--sweep-c",
        "0.5,1,2,4",
        "--out",
        out.to_str().unwrap(),
    ]);
    if code != 0 {
        std::process::exit(code);
    }
    let text = std::fs::read_to_string(out.join("results.jsonl")).unwrap();
    for line in text.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        println!(
            "b = {:.2}, c = {:<4} μ₁ = {:.6}  {}{}",
            r["b"].as_f64().unwrap(),
            r["c"].as_f64().unwrap(),
            r["mu1"].as_f64().unwrap(),
            r["verdict"].as_str().unwrap(),
            if r["degenerate"] == true { " (degenerate)" } else { "" }
        );
    }
    println!("outputs in {}", out.display());
}
