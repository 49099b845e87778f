//! Bookkeeping for the acceptance run: one verdict line per criterion.

use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{:>2}] {}: {} ({:.2} s)", self.id, self.title, self.detail, self.seconds)
    }
}

#[derive(Debug, Default)]
pub struct Suite {
    pub verdicts: Vec<Verdict>,
}

impl Suite {
    /// Run one check, print its line immediately and keep the verdict.
    ///
    /// A check that errors out counts as a failure with the error as detail.
    pub fn check<E: fmt::Display>(&mut self, id: u32, title: &'static str, f: impl FnOnce() -> Result<(bool, String), E>) {
        let clock = Instant::now();
        let (pass, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let v = Verdict { id, title, pass, detail, seconds: clock.elapsed().as_secs_f64() };
        println!("{v}");
        self.verdicts.push(v);
    }

    pub fn failures(&self) -> Vec<u32> {
        self.verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect()
    }

    /// Summary line; the caller turns failures into a non-zero exit.
    pub fn summary(&self) -> String {
        let failed = self.failures();
        let passed = self.verdicts.len() - failed.len();
        if failed.is_empty() {
            format!("acceptance: {passed}/{} criteria passed", self.verdicts.len())
        } else {
            format!("acceptance: {passed}/{} criteria passed; failed {failed:?}", self.verdicts.len())
        }
    }
}
