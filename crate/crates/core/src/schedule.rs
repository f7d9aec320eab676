//! Sampler schedules such as `GS`, `MH4`, `4MH-1GS` or `GS-to-MH@100`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed schedule {expr:?}: {reason}")]
pub struct MalformedSchedule {
    pub expr: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sampler {
    Gibbs,
    Metropolis { steps: usize },
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Gibbs => f.write_str("GS"),
            Sampler::Metropolis { steps: 1 } => f.write_str("MH"),
            Sampler::Metropolis { steps } => write!(f, "MH{steps}"),
        }
    }
}

/// Expanded iteration plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    entries: Vec<Sampler>,
}

impl Schedule {
    pub fn entries(&self) -> &[Sampler] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn uses_metropolis(&self) -> bool {
        self.entries.iter().any(|s| matches!(s, Sampler::Metropolis { .. }))
    }
}

#[derive(Debug, Clone, Copy)]
enum Plan {
    Fixed(Sampler),
    Cycle { mh: usize, steps: usize, gs: usize },
    Switch { first: Sampler, then: Sampler, at: usize },
}

impl FromStr for Plan {
    type Err = String;

    fn from_str(expr: &str) -> Result<Self, String> {
        if let Some((head, at)) = expr.split_once('@') {
            let at: usize = at.parse().map_err(|_| format!("switch point {at:?} is not a count"))?;
            let (first, then) = head.split_once("-to-").ok_or("expected <sampler>-to-<sampler>@<t>")?;
            let (first, then) = (sampler(first)?, sampler(then)?);
            if first == then {
                return Err("switch between identical samplers".into());
            }
            return Ok(Plan::Switch { first, then, at });
        }
        if let Some((mh, gs)) = expr.split_once('-') {
            let (mh_count, mh_rest) = leading_count(mh)?;
            let steps = match sampler(mh_rest)? {
                Sampler::Metropolis { steps } => steps,
                Sampler::Gibbs => return Err("cycle must start with MH".into()),
            };
            let (gs_count, gs_rest) = leading_count(gs)?;
            if gs_rest != "GS" {
                return Err("cycle must end with GS".into());
            }
            if mh_count == 0 && gs_count == 0 {
                return Err("empty cycle".into());
            }
            return Ok(Plan::Cycle { mh: mh_count, steps, gs: gs_count });
        }
        Ok(Plan::Fixed(sampler(expr)?))
    }
}

fn leading_count(s: &str) -> Result<(usize, &str), String> {
    let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return Err(format!("{s:?} needs a leading iteration count"));
    }
    let n = s[..digits].parse().map_err(|_| format!("count in {s:?} overflows"))?;
    Ok((n, &s[digits..]))
}

fn sampler(s: &str) -> Result<Sampler, String> {
    if s == "GS" {
        return Ok(Sampler::Gibbs);
    }
    let rest = s.strip_prefix("MH").ok_or_else(|| format!("unknown sampler {s:?}"))?;
    let steps = if rest.is_empty() {
        1
    } else {
        rest.parse::<usize>().map_err(|_| format!("bad MH step count {rest:?}"))?
    };
    if steps == 0 {
        return Err("MH steps must be at least 1".into());
    }
    Ok(Sampler::Metropolis { steps })
}

/// Expands `expr` to exactly `total_iterations` entries.
pub fn parse_schedule(expr: &str, total_iterations: usize) -> Result<Schedule, MalformedSchedule> {
    let fail = |reason: String| MalformedSchedule { expr: expr.to_string(), reason };
    if total_iterations == 0 {
        return Err(fail("at least one iteration is required".into()));
    }
    let plan: Plan = expr.trim().parse().map_err(fail)?;
    let entries = (0..total_iterations)
        .map(|it| match plan {
            Plan::Fixed(s) => s,
            Plan::Cycle { mh, steps, gs } => {
                if it % (mh + gs) < mh {
                    Sampler::Metropolis { steps }
                } else {
                    Sampler::Gibbs
                }
            }
            Plan::Switch { first, then, at } => {
                if it < at {
                    first
                } else {
                    then
                }
            }
        })
        .collect();
    Ok(Schedule { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sampler::*;

    const MH: Sampler = Metropolis { steps: 1 };

    #[test]
    fn fixed() {
        assert_eq!(parse_schedule("GS", 3).unwrap().entries(), &[Gibbs; 3]);
        assert_eq!(parse_schedule("MH4", 2).unwrap().entries(), &[Metropolis { steps: 4 }; 2]);
        assert_eq!(parse_schedule("MH", 1).unwrap().entries(), &[MH]);
    }

    #[test]
    fn cycle() {
        let s = parse_schedule("4MH-1GS", 10).unwrap();
        assert_eq!(s.entries(), &[MH, MH, MH, MH, Gibbs, MH, MH, MH, MH, Gibbs]);
        let s = parse_schedule("2MH3-2GS", 5).unwrap();
        assert_eq!(s.entries(), &[Metropolis { steps: 3 }, Metropolis { steps: 3 }, Gibbs, Gibbs, Metropolis { steps: 3 }]);
    }

    #[test]
    fn switch() {
        let s = parse_schedule("GS-to-MH@100", 150).unwrap();
        assert!(s.entries()[..100].iter().all(|&x| x == Gibbs));
        assert!(s.entries()[100..].iter().all(|&x| x == MH));
        let s = parse_schedule("MH-to-GS@1", 2).unwrap();
        assert_eq!(s.entries(), &[MH, Gibbs]);
    }

    #[test]
    fn display_round_trips() {
        for s in [Gibbs, MH, Metropolis { steps: 7 }] {
            assert_eq!(parse_schedule(&s.to_string(), 1).unwrap().entries(), &[s]);
        }
    }

    #[test]
    fn malformed() {
        for bad in ["", "gs", "MH0", "XX", "4MH-1", "MH-1GS", "GS-to-GS@3", "GS-to-MH@x", "0MH-0GS", "4GS-1GS"] {
            assert!(parse_schedule(bad, 5).is_err(), "{bad}");
        }
        assert!(parse_schedule("GS", 0).is_err());
    }
}
