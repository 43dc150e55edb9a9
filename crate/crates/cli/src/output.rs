//! CSV result rows and run manifests.
//!
//! CSV bodies are byte-reproducible: fixed header, rows sorted by
//! (scheme, seed, sweep value), floats printed with their shortest
//! round-trip representation, and no timestamps. The manifest carries the
//! single timestamp line plus everything needed to rerun: tool version,
//! seeds, sweep variable and the full effective config.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

pub const CSV_HEADER: &str =
    "scheme,seed,sweep_var,sweep_value,n_train,avg_se_bps_hz,beam_acc,clusters,slots";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: &'static str,
    pub seed: u64,
    pub sweep_var: &'static str,
    pub sweep_value: u64,
    pub n_train: usize,
    pub avg_se_bps_hz: f64,
    pub beam_acc: f64,
    pub clusters: usize,
    pub slots: usize,
}

/// Sorts rows by (scheme, seed, sweep value) and writes header + body.
pub fn write_csv(path: &Path, rows: &mut [ResultRow]) -> Result<(), CliError> {
    rows.sort_by(|a, b| {
        a.scheme.cmp(b.scheme).then(a.seed.cmp(&b.seed)).then(a.sweep_value.cmp(&b.sweep_value))
    });
    let mut body = String::with_capacity(rows.len() * 64 + CSV_HEADER.len() + 1);
    body.push_str(CSV_HEADER);
    body.push('\n');
    for r in rows.iter() {
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.seed,
            r.sweep_var,
            r.sweep_value,
            r.n_train,
            r.avg_se_bps_hz,
            r.beam_acc,
            r.clusters,
            r.slots
        ));
    }
    fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes the run manifest: one timestamp line, run metadata, then the
/// effective configuration TOML verbatim below the marker.
pub fn write_manifest(
    path: &Path,
    command: &str,
    sweep_var: &str,
    seeds: &[u64],
    jobs: usize,
    config_toml: &str,
) -> Result<(), CliError> {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let seeds_str = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let text = format!(
        "# mmnoma run manifest\n\
         generated_unix = {unix}\n\
         tool_version = \"{}\"\n\
         command = \"{command}\"\n\
         sweep_var = \"{sweep_var}\"\n\
         seeds = \"{seeds_str}\"\n\
         jobs = {jobs}\n\
         \n\
         # effective configuration (TOML, re-parseable)\n\
         {config_toml}",
        env!("CARGO_PKG_VERSION")
    );
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &'static str, seed: u64, sweep: u64) -> ResultRow {
        ResultRow {
            scheme,
            seed,
            sweep_var: "user_count",
            sweep_value: sweep,
            n_train: 100,
            avg_se_bps_hz: 2.5,
            beam_acc: 1.0,
            clusters: 3,
            slots: 1,
        }
    }

    #[test]
    fn rows_are_sorted_and_header_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let mut rows =
            vec![row("vision", 2, 10), row("csi_fresh", 1, 10), row("vision", 1, 20), row("vision", 1, 10)];
        write_csv(&path, &mut rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("csi_fresh,1,"));
        assert!(lines[2].starts_with("vision,1,user_count,10"));
        assert!(lines[3].starts_with("vision,1,user_count,20"));
        assert!(lines[4].starts_with("vision,2,"));
    }

    #[test]
    fn csv_body_is_byte_stable_across_writes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let mut rows1 = vec![row("vision", 2, 10), row("csi_fresh", 7, 10)];
        let mut rows2 = vec![row("csi_fresh", 7, 10), row("vision", 2, 10)];
        write_csv(&a, &mut rows1).unwrap();
        write_csv(&b, &mut rows2).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }

    #[test]
    fn manifest_has_one_timestamp_line_and_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        write_manifest(&path, "compare", "user_count", &[1, 2], 2, "n_train = 5\n").unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("generated_unix").count(), 1);
        assert!(text.contains("command = \"compare\""));
        assert!(text.contains("seeds = \"1,2\""));
        assert!(text.contains("n_train = 5"));
    }
}
