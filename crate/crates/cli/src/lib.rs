//! Library side of the `sqc` command: worked-example checks, the benchmark grid and
//! argument parsing helpers.

pub mod bench;
pub mod verify;

/// Parses `a..b` (inclusive integer range) or a comma-separated list.
pub fn parse_number_list(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: i64 = lo.trim().parse().map_err(|_| format!("bad range start in `{text}`"))?;
        let hi: i64 = hi.trim().parse().map_err(|_| format!("bad range end in `{text}`"))?;
        if lo > hi {
            return Err(format!("empty range `{text}`"));
        }
        return Ok((lo..=hi).map(|x| x as f64).collect());
    }
    let values = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("empty list".into());
    }
    Ok(values)
}

pub fn parse_count_list(text: &str) -> Result<Vec<u64>, String> {
    parse_number_list(text)?
        .into_iter()
        .map(|x| {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as u64)
            } else {
                Err(format!("`{x}` is not a non-negative integer"))
            }
        })
        .collect()
}
