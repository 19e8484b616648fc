//! Daily share of outlet posts expressing each emotion or moral foundation,
//! smoothed over a moving window of days.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Days, NaiveDate};

use crate::affect::{AffectVector, Emotion, Foundation, NEUTRAL_MORAL};
use crate::error::{Error, Result};

/// Eight emotions followed by the five foundations.
pub fn prevalence_columns() -> Vec<String> {
    Emotion::ALL
        .iter()
        .map(|e| e.name().to_string())
        .chain(Foundation::ALL.iter().map(|f| format!("{}_{}", f.virtue_name(), f.vice_name())))
        .collect()
}

/// 0/1 indicators in [`prevalence_columns`] order: an emotion is present
/// when its score is nonzero, a foundation when its mean is not neutral.
pub fn indicators(v: &AffectVector) -> [bool; 13] {
    let mut out = [false; 13];
    for i in 0..8 {
        out[i] = v.emotions[i] != 0.0;
    }
    for k in 0..5 {
        out[8 + k] = v.moral_means[k] != NEUTRAL_MORAL;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    /// First and last day of the window (days since the epoch).
    pub first_day: i64,
    pub last_day: i64,
    pub n_posts: usize,
    /// Share of the window's posts with each indicator set; NaN when the
    /// window has no posts.
    pub ratios: [f64; 13],
}

/// Pooled ratios over every run of `window` consecutive days between the
/// first and last observed day. Days without posts count as empty.
pub fn prevalence_series<'a>(posts: impl IntoIterator<Item = (i64, &'a AffectVector)>, window: usize) -> Result<Vec<WindowRow>> {
    if window == 0 {
        return Err(Error::config("prevalence window must be at least one day"));
    }
    let mut daily: BTreeMap<i64, (usize, [usize; 13])> = BTreeMap::new();
    for (day, v) in posts {
        let e = daily.entry(day).or_insert((0, [0; 13]));
        e.0 += 1;
        for (c, hit) in e.1.iter_mut().zip(indicators(v)) {
            *c += usize::from(hit);
        }
    }
    let (Some(&first), Some(&last)) = (daily.keys().next(), daily.keys().next_back()) else {
        return Ok(Vec::new());
    };
    let span = (last - first + 1) as usize;
    if span < window {
        log::warn!("{span} days of posts is shorter than the {window}-day window; no prevalence rows");
        return Ok(Vec::new());
    }
    let days: Vec<(usize, [usize; 13])> = (first..=last).map(|d| daily.get(&d).copied().unwrap_or((0, [0; 13]))).collect();
    Ok(days
        .windows(window)
        .enumerate()
        .map(|(s, win)| {
            let n: usize = win.iter().map(|d| d.0).sum();
            let mut ratios = [f64::NAN; 13];
            if n > 0 {
                for (c, r) in ratios.iter_mut().enumerate() {
                    *r = win.iter().map(|d| d.1[c]).sum::<usize>() as f64 / n as f64;
                }
            }
            WindowRow {
                first_day: first + s as i64,
                last_day: first + (s + window - 1) as i64,
                n_posts: n,
                ratios,
            }
        })
        .collect())
}

fn iso_day(day: i64) -> String {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
    let date = if day >= 0 {
        epoch.checked_add_days(Days::new(day as u64))
    } else {
        epoch.checked_sub_days(Days::new(day.unsigned_abs()))
    };
    date.map_or_else(|| day.to_string(), |d| d.to_string())
}

/// Writes `window_start,window_end,n_posts,<column>...`.
pub fn write_prevalence_csv<W: Write>(out: W, rows: &[WindowRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["window_start".to_string(), "window_end".to_string(), "n_posts".to_string()];
    header.extend(prevalence_columns());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![iso_day(r.first_day), iso_day(r.last_day), r.n_posts.to_string()];
        rec.extend(r.ratios.iter().map(|v| if v.is_nan() { String::new() } else { format!("{v:.6}") }));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_with(anger: f64, care: f64) -> AffectVector {
        let mut v = AffectVector::neutral();
        v.emotions[0] = anger;
        v.moral_means[0] = care;
        v
    }

    #[test]
    fn uniform_week_gives_daily_ratio() {
        let a = vec_with(0.1, 7.0);
        let b = vec_with(0.0, 5.0);
        let posts: Vec<(i64, &AffectVector)> = (0..7).flat_map(|d| [(d, &a), (d, &b), (d, &b), (d, &b)]).collect();
        let rows = prevalence_series(posts, 7).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n_posts, 28);
        assert_eq!(rows[0].ratios[0], 0.25);
        assert_eq!(rows[0].ratios[8], 0.25);
        assert_eq!(rows[0].ratios[1], 0.0);
    }

    #[test]
    fn identical_days_are_flat() {
        let a = vec_with(0.2, 3.0);
        let b = vec_with(0.0, 5.0);
        let posts: Vec<(i64, &AffectVector)> = (100..130).flat_map(|d| [(d, &a), (d, &b)]).collect();
        let rows = prevalence_series(posts, 7).unwrap();
        assert_eq!(rows.len(), 24);
        assert!(rows.iter().all(|r| r.ratios == rows[0].ratios && r.ratios[0] == 0.5));
    }

    #[test]
    fn gaps_and_short_spans() {
        let a = vec_with(0.2, 5.0);
        let rows = prevalence_series([(0, &a), (9, &a)], 7).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].n_posts, 0);
        assert!(rows[1].ratios[0].is_nan());
        assert!(prevalence_series([(0, &a)], 7).unwrap().is_empty());
        assert!(prevalence_series([(0, &a)], 0).is_err());
    }

    #[test]
    fn dates() {
        assert_eq!(iso_day(0), "1970-01-01");
        assert_eq!(iso_day(18_262), "2020-01-01");
        assert_eq!(iso_day(-1), "1969-12-31");
    }
}
