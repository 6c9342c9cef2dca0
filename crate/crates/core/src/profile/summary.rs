use std::fmt;

use super::SourceProfile;

/// Headline numbers for a profile.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Summary {
    pub functions: usize,
    pub total_samples: u64,
    /// `(asm_name, total_count)`, hottest first, ties by name.
    pub hottest: Vec<(String, u64)>,
    /// Known only when the summary comes from a conversion.
    pub dropped_samples: Option<u64>,
}

pub fn summarize(profile: &SourceProfile, top: usize) -> Summary {
    let mut hottest: Vec<(String, u64)> = profile
        .functions
        .values()
        .map(|f| (f.asm_name.clone(), f.total_count))
        .collect();
    hottest.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    hottest.truncate(top);
    Summary {
        functions: profile.functions.len(),
        total_samples: profile.total_count(),
        hottest,
        dropped_samples: None,
    }
}

impl Summary {
    pub fn with_dropped(mut self, dropped: u64) -> Self {
        self.dropped_samples = Some(dropped);
        self
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "functions: {}", self.functions)?;
        writeln!(f, "total: {}", self.total_samples)?;
        if let Some(d) = self.dropped_samples {
            writeln!(f, "dropped: {d}")?;
        }
        for (name, total) in &self.hottest {
            writeln!(f, "  {total:>12}  {name}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::FunctionProfile;

    fn profile(totals: &[(&str, u64)]) -> SourceProfile {
        let mut p = SourceProfile::new();
        for &(name, t) in totals {
            let mut f = FunctionProfile::new(name, name);
            f.body.insert(crate::profile::LineKey::new(0, 0), t);
            f.total_count = t;
            p.functions.insert(name.into(), f);
        }
        p
    }

    #[test]
    fn empty() {
        assert_eq!(summarize(&SourceProfile::new(), 5), Summary::default());
    }

    #[test]
    fn hottest_first_then_by_name() {
        let s = summarize(&profile(&[("f10", 10), ("f30", 30)]), 5);
        assert_eq!(s.hottest, vec![("f30".into(), 30), ("f10".into(), 10)]);
        assert_eq!(s.total_samples, 40);
        let s = summarize(&profile(&[("zeta", 5), ("alpha", 5), ("mid", 9)]), 2);
        assert_eq!(s.hottest, vec![("mid".into(), 9), ("alpha".into(), 5)]);
        assert_eq!(s.functions, 3);
    }
}
