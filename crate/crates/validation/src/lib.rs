//! Outcome bookkeeping for the acceptance target.

use std::fmt::Write;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(id: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self { id, pass, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {} {}", self.id, if self.pass { "pass" } else { "FAIL" }, self.detail)
    }
}

/// One line per outcome followed by a tally.
pub fn summary(outcomes: &[Outcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        writeln!(s, "{}", o.line()).unwrap();
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    write!(s, "acceptance: {passed}/{} criteria pass", outcomes.len()).unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines() {
        let s = summary(&[Outcome::new("A1", true, "x"), Outcome::new("A2", false, "y")]);
        assert_eq!(s, "A1 pass x\nA2 FAIL y\nacceptance: 1/2 criteria pass");
    }
}
