//! Small file helpers: atomic writes and the trajectory/report CSV shapes.

use std::path::Path;

use shiftlab::sim::Trajectory;

use crate::error::{io_err, CliError, CliResult};

/// Write via a sibling temp file and rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = match path.file_name() {
        Some(name) => {
            let mut n = name.to_os_string();
            n.push(".tmp");
            path.with_file_name(n)
        }
        None => {
            return Err(CliError::Other(format!(
                "not a file path: {}",
                path.display()
            )))
        }
    };
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// `epoch,asim_true,asim_ref,beta,thr` rows; the epoch column counts
/// completed correction passes, so row 0 is the initial annotation set and
/// its beta/thr fields are empty. Fields without a value stay empty.
pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut out = String::from("epoch,asim_true,asim_ref,beta,thr\n");
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    out.push_str(&format!(
        "0,{},{},,\n",
        fmt_opt(t.initial_true),
        t.initial_ref
    ));
    for r in &t.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch + 1,
            fmt_opt(r.asim_true),
            r.asim_ref,
            r.beta,
            r.thr
        ));
    }
    out
}

/// `image,asim` per-image report rows.
pub fn per_image_csv(per_image: &[(String, f64)]) -> String {
    let mut out = String::from("image,asim\n");
    for (id, v) in per_image {
        out.push_str(&format!("{id},{v}\n"));
    }
    out
}

/// Parse an `image,asim` CSV back into pairs.
pub fn parse_per_image_csv(text: &str, path: &str) -> CliResult<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "image,asim" {
                return Err(CliError::Csv {
                    path: path.to_string(),
                    line: 1,
                    message: format!("expected header image,asim, got {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (id, value) = line.rsplit_once(',').ok_or_else(|| CliError::Csv {
            path: path.to_string(),
            line: i + 1,
            message: format!("expected image,asim row, got {line:?}"),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| CliError::Csv {
            path: path.to_string(),
            line: i + 1,
            message: format!("cannot parse aSim value {value:?}"),
        })?;
        rows.push((id.to_string(), value));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_image_csv_round_trip() {
        let rows = vec![("a".to_string(), 83.5), ("b,with comma".to_string(), 22.57)];
        let text = per_image_csv(&rows);
        let back = parse_per_image_csv(&text, "mem").unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse_per_image_csv("id,value\na,1\n", "mem").is_err());
    }
}
