//! Tables 1 to 5: one variant each, one row per train size.

use crate::matrix::TRAIN_SIZES;
use crate::results::ResultsTable;
use crate::variant::Variant;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    TrainCompletion,
    TrainOverMin,
    TestCompletion,
    TestOverMin,
    TriviallyWrong,
    Imbalance,
}

impl Column {
    /// Table 1 punctuates its test-completion header differently from the rest.
    fn header(self, table: u8) -> &'static str {
        match self {
            Column::TrainCompletion => "% comp. train",
            Column::TrainOverMin => "# over min. train",
            Column::TestCompletion if table == 1 => "% comp. test",
            Column::TestCompletion => "% comp test",
            Column::TestOverMin => "# over min. test",
            Column::TriviallyWrong => "% trivially wrong",
            Column::Imbalance => "imbalance",
        }
    }
}

fn columns(table: u8) -> &'static [Column] {
    use Column::*;
    match table {
        1 => &[TrainCompletion, TrainOverMin, TestCompletion],
        2 | 3 => &[TestCompletion, TestOverMin, TriviallyWrong],
        _ => &[TestCompletion, TestOverMin, TriviallyWrong, Imbalance],
    }
}

fn title(table: u8) -> &'static str {
    match table {
        1 => "Deep Q-learning, absolute grid",
        2 => "REINFORCE, absolute grid",
        3 => "REINFORCE, ego-centric grid",
        4 => "REINFORCE, ego-centric grid, mirror-symmetric head",
        _ => "REINFORCE, ego-centric grid, mirror-symmetric head, max-probability penalty",
    }
}

/// A rendered table. Cells without a full set of seeds are gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: u8,
    pub variant: Variant,
    pub headers: Vec<&'static str>,
    /// `(n_train, values)`, train sizes descending.
    pub rows: Vec<(usize, Vec<Option<f64>>)>,
    /// Train sizes whose cell is missing or short of seeds.
    pub gaps: Vec<usize>,
}

impl Report {
    pub fn is_complete(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn markdown(&self) -> String {
        let mut out = format!("Table {}: {} ({})\n\n", self.table, title(self.table), self.variant);
        out += &format!("| {} |\n", self.headers.join(" | "));
        out += &format!("|{}\n", "---|".repeat(self.headers.len()));
        for (n, values) in &self.rows {
            let cells: Vec<String> = values.iter().map(|v| v.map(|x| format!("{x:.2}")).unwrap_or("-".into())).collect();
            out += &format!("| {n} | {} |\n", cells.join(" | "));
        }
        if !self.gaps.is_empty() {
            let sizes: Vec<String> = self.gaps.iter().map(ToString::to_string).collect();
            out += &format!("\nIncomplete rows: {}\n", sizes.join(", "));
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for (n, values) in &self.rows {
            let mut rec = vec![n.to_string()];
            rec.extend(values.iter().map(|v| v.map(|x| format!("{x:.2}")).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

/// Builds table `which` (1..=5) from `results`. A row is filled only when
/// its cell holds exactly `n_seeds` test and train rows.
pub fn emit_report(results: &ResultsTable, which: u8, n_seeds: usize) -> Result<Report, HarnessError> {
    let variant =
        Variant::for_table(which).ok_or_else(|| HarnessError::Config(format!("no table {which}; choose 1 to 5")))?;
    if n_seeds == 0 {
        return Err(HarnessError::Config("n_seeds must be positive".into()));
    }
    let cols = columns(which);
    let mut headers = vec!["# train"];
    headers.extend(cols.iter().map(|c| c.header(which)));
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for n in TRAIN_SIZES {
        let full = results
            .cell(variant, n)
            .filter(|c| c.test.len() == n_seeds && c.train.len() == n_seeds && c.finished_seeds().count() == n_seeds);
        let values = match full {
            Some(cell) => {
                let test = cell.test_mean().expect("non-empty cell");
                let train = cell.train_mean().expect("non-empty cell");
                cols.iter()
                    .map(|c| match c {
                        Column::TrainCompletion => Some(train.completion_rate),
                        Column::TrainOverMin => train.over_minimum,
                        Column::TestCompletion => Some(test.completion_rate),
                        Column::TestOverMin => test.over_minimum,
                        Column::TriviallyWrong => Some(test.trivially_wrong),
                        Column::Imbalance => test.imbalance,
                    })
                    .collect()
            }
            None => {
                gaps.push(n);
                vec![None; cols.len()]
            }
        };
        rows.push((n, values));
    }
    Ok(Report { table: which, variant, headers, rows, gaps })
}
