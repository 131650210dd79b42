use std::str::FromStr;

/// Seed list written as `N`, `A..B` (exclusive) or `a,b,c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = |part: &str| format!("`{part}` is not a seed, range `A..B` or comma list");
        if let Some((a, b)) = s.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad(s))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(s))?;
            if a >= b {
                return Err(format!("seed range `{s}` is empty"));
            }
            return Ok(Self((a..b).collect()));
        }
        let mut out = Vec::new();
        for part in s.split(',') {
            let v: u64 = part.trim().parse().map_err(|_| bad(part))?;
            if !out.contains(&v) {
                out.push(v);
            }
        }
        Ok(Self(out))
    }
}
