//! Drives the harness from a JSON configuration, exactly as the CLI does, and
//! reads the written energy series back.

use vicinal::harness::{parse_config, read_series_csv, run_experiment};

fn main() -> vicinal::Result<()> {
    let out = std::env::temp_dir().join("vicinal-config-run");
    let text = format!(
        r#"{{
            "kind": "run",
            "initial": {{"sine_cubed": {{"A": 0.1, "M": 1.0}}}},
            "n": 64,
            "epsilon": 1e-3,
            "t_end": 1e-4,
            "out_dir": {:?}
        }}"#,
        out.display().to_string()
    );
    let cfg = parse_config(&text)?;
    let art = run_experiment(&cfg)?;

    for v in &art.verdicts {
        println!("{:<5} {}", if v.satisfied { "ok" } else { "FAIL" }, v.name);
    }
    for path in &art.series {
        let series = read_series_csv(path)?;
        let (first, last) = (series[0], series[series.len() - 1]);
        println!(
            "{}: {} rows, F {:.8} -> {:.8}",
            path.display(),
            series.len(),
            first.f,
            last.f
        );
    }
    println!("metadata: {}", art.metadata_path.display());
    Ok(())
}
