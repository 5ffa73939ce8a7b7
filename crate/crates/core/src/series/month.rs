use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A calendar month, stored as a single month index `year * 12 + month - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthKey(i32);

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidMonth { year, month });
        }
        Ok(Self(year * 12 + month as i32 - 1))
    }

    pub fn from_index(index: i32) -> Self {
        Self(index)
    }

    pub fn index(self) -> i32 {
        self.0
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    /// Calendar month, 1..=12.
    pub fn month(self) -> u32 {
        self.0.rem_euclid(12) as u32 + 1
    }

    pub fn succ(self) -> Self {
        Self(self.0 + 1)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, months: i32) -> Self {
        Self(self.0 + months)
    }

    /// Signed number of months from `earlier` to `self`.
    pub fn months_since(self, earlier: MonthKey) -> i32 {
        self.0 - earlier.0
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

/// Parses `YYYY-MM`.
impl FromStr for MonthKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSpec(format!("expected a YYYY-MM month, got `{s}`"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        Self::new(year, month)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn december_rolls_over() {
        let dec = MonthKey::new(2019, 12).unwrap();
        assert_eq!(dec.succ(), MonthKey::new(2020, 1).unwrap());
        assert_eq!(dec.to_string(), "2019-12");
        assert!(MonthKey::new(2019, 13).is_err());
        assert!(MonthKey::new(2019, 0).is_err());
        assert_eq!("2019-12".parse::<MonthKey>().unwrap(), dec);
        assert!("2019/12".parse::<MonthKey>().is_err());
        assert!("2019-13".parse::<MonthKey>().is_err());
    }

    proptest! {
        #[test]
        fn distance_is_exact(y1 in 1900i32..2100, m1 in 1u32..=12, y2 in 1900i32..2100, m2 in 1u32..=12) {
            let a = MonthKey::new(y1, m1).unwrap();
            let b = MonthKey::new(y2, m2).unwrap();
            prop_assert_eq!(b.months_since(a), (y2 - y1) * 12 + m2 as i32 - m1 as i32);
            prop_assert_eq!(a.add(b.months_since(a)), b);
            prop_assert_eq!(a < b, (y1, m1) < (y2, m2));
            prop_assert_eq!((a.year(), a.month()), (y1, m1));
            prop_assert_eq!(a.to_string().parse::<MonthKey>().unwrap(), a);
        }
    }
}
