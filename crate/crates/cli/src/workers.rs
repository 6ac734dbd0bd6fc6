use anyhow::{bail, Context, Result};
use sentinel_core::parallel::default_workers;

pub const ENV_VAR: &str = "SENTINEL_WORKERS";

fn parse_list(s: &str) -> Result<Vec<usize>> {
    let list = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad worker count `{p}`")))
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() || list.contains(&0) {
        bail!("worker counts must be positive");
    }
    Ok(list)
}

fn from_env() -> Result<Option<Vec<usize>>> {
    match std::env::var(ENV_VAR) {
        Ok(v) if !v.trim().is_empty() => parse_list(&v).with_context(|| format!("in {ENV_VAR}")).map(Some),
        _ => Ok(None),
    }
}

/// Pool size for a command: the environment wins over `--workers`, which
/// wins over the core count.
pub fn resolve(flag: Option<usize>) -> Result<usize> {
    if let Some(list) = from_env()? {
        if list.len() != 1 {
            bail!("{ENV_VAR} must be a single count for this command");
        }
        return Ok(list[0]);
    }
    match flag {
        Some(0) => bail!("--workers must be positive"),
        Some(n) => Ok(n),
        None => Ok(default_workers()),
    }
}

/// Worker counts for the benchmark sweep.
pub fn resolve_list(flag: &[usize]) -> Result<Vec<usize>> {
    if let Some(list) = from_env()? {
        return Ok(list);
    }
    if flag.is_empty() || flag.contains(&0) {
        bail!("--workers must list positive counts");
    }
    Ok(flag.to_vec())
}
