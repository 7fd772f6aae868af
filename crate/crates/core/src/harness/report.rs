use std::fmt::Write;

use super::experiment::{CvResult, Report};

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Human-readable CV table.
pub fn render_cv_table(cv: &CvResult) -> String {
    let width = cv
        .rows
        .iter()
        .map(|r| r.kernel.to_string().len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut s = String::new();
    writeln!(
        s,
        "{:<width$}  {:>10}  {:>9}  folds",
        "kernel", "C", "mean CCR"
    )
    .unwrap();
    for (i, r) in cv.rows.iter().enumerate() {
        let folds: Vec<String> = r
            .folds
            .iter()
            .map(|t| format!("{}/{}", t.correct, t.total))
            .collect();
        let mark = if i == cv.selected { " *" } else { "" };
        writeln!(
            s,
            "{:<width$}  {:>10}  {:>9}  {}{mark}",
            r.kernel.to_string(),
            r.c,
            pct(r.mean_ccr),
            folds.join(" ")
        )
        .unwrap();
    }
    s
}

/// Line-oriented `key=value` form of the CV table.
pub fn render_cv_kv(cv: &CvResult) -> String {
    let mut s = String::new();
    for (i, r) in cv.rows.iter().enumerate() {
        let folds: Vec<String> = r
            .folds
            .iter()
            .map(|t| format!("{}/{}", t.correct, t.total))
            .collect();
        writeln!(s, "cv.{i}.kernel={}", r.kernel).unwrap();
        writeln!(s, "cv.{i}.c={}", r.c).unwrap();
        writeln!(s, "cv.{i}.mean_ccr={:.6}", r.mean_ccr).unwrap();
        writeln!(s, "cv.{i}.folds={}", folds.join(",")).unwrap();
    }
    writeln!(s, "cv.selected={}", cv.selected).unwrap();
    for (f, fp) in cv.fold_fingerprints.iter().enumerate() {
        writeln!(s, "cv.fold.{f}.fingerprint={fp}").unwrap();
    }
    s
}

impl Report {
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "classes: {}", self.classes.join(", ")).unwrap();
        writeln!(
            s,
            "train: {}  test: {}  folds: {}  seed: {}",
            self.n_train, self.n_test, self.folds, self.seed
        )
        .unwrap();
        writeln!(s).unwrap();
        s.push_str(&render_cv_table(&self.cv));
        writeln!(s).unwrap();
        writeln!(
            s,
            "selected: {} C={}",
            self.selected_kernel, self.selected_c
        )
        .unwrap();
        writeln!(
            s,
            "test CCR: {}/{} = {}",
            self.test.correct,
            self.test.total,
            pct(self.test.ccr())
        )
        .unwrap();
        writeln!(s).unwrap();
        writeln!(s, "confusion (rows: true class, columns: predicted)").unwrap();
        let width = self
            .classes
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(8);
        let mut header = format!("{:<width$}", "");
        for c in self.classes.iter().map(String::as_str).chain(["excluded"]) {
            write!(header, "  {c:>width$}").unwrap();
        }
        writeln!(s, "{}", header.trim_end()).unwrap();
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            let mut line = format!("{c:<width$}");
            for v in row {
                write!(line, "  {v:>width$}").unwrap();
            }
            writeln!(s, "{line}").unwrap();
        }
        s
    }

    pub fn render_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "classes={}", self.classes.join(",")).unwrap();
        writeln!(s, "n_train={}", self.n_train).unwrap();
        writeln!(s, "n_test={}", self.n_test).unwrap();
        writeln!(s, "folds={}", self.folds).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        s.push_str(&render_cv_kv(&self.cv));
        writeln!(s, "selected.kernel={}", self.selected_kernel).unwrap();
        writeln!(s, "selected.c={}", self.selected_c).unwrap();
        writeln!(s, "test.correct={}", self.test.correct).unwrap();
        writeln!(s, "test.total={}", self.test.total).unwrap();
        writeln!(s, "test.ccr={:.6}", self.test.ccr()).unwrap();
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            let v: Vec<String> = row.iter().map(usize::to_string).collect();
            writeln!(s, "confusion.{c}={}", v.join(",")).unwrap();
        }
        writeln!(s, "train_fingerprint={}", self.train_fingerprint).unwrap();
        s
    }

    pub fn render_timings(&self) -> String {
        let mut s = String::new();
        for (stage, secs) in &self.timings {
            writeln!(s, "{stage}={secs:.3}").unwrap();
        }
        s
    }
}
