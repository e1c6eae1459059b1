//! CSV/JSON emission with atomic file output.

use crate::Failure;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One CSV row of a sweep. `stderr` stays empty (not 0) for exact methods.
pub struct Row {
    pub x: f64,
    pub value: f64,
    pub stderr: Option<f64>,
    pub method: String,
    pub model: String,
}

pub fn render_csv(x_name: &str, rows: &[Row]) -> String {
    let mut s = format!("{x_name},value_bits,stderr,method,model\n");
    for r in rows {
        let se = r.stderr.map(|v| format!("{v:.6e}")).unwrap_or_default();
        s.push_str(&format!(
            "{:.6},{:.10},{},{},{}\n",
            r.x, r.value, se, r.method, r.model
        ));
    }
    s
}

/// Write to stdout, or to `path` via a temporary file renamed into place so
/// a failed run never leaves a partial CSV behind.
pub fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), Failure> {
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => write_atomic(p, text),
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), Failure> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        )),
        None => PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        )),
    };
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Parse an inclusive `start:step:stop` range of dB values.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::config(format!(
            "range must be start:step:stop, got \"{spec}\""
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Failure::config(format!("bad range number \"{p}\"")))
        })
        .collect::<Result<_, _>>()?;
    let (start, step, stop) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || stop < start {
        return Err(Failure::config(format!("range \"{spec}\" must ascend")));
    }
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let v = start + step * i as f64;
        if v > stop + 1e-9 * step {
            break;
        }
        out.push(v);
        i += 1;
    }
    Ok(out)
}
