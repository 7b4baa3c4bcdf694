//! Measurement records and their line-oriented text format
//! `n | t1:k1 t2:k2 ... | m | tau`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operators::Model;
use crate::scalar::Real;

/// A detected or undetected jump through channel `channel` at time `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent<T> {
    pub time: T,
    pub channel: usize,
}

/// Initial outcome, time-ordered jumps and final outcome on `[0, τ]`.
///
/// Used both for full records (every jump) and visible records (detected
/// jumps only); the two share the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub initial: usize,
    pub events: Vec<JumpEvent<T>>,
    pub final_outcome: usize,
    pub tau: T,
}

pub type FullRecord<T> = Record<T>;
pub type VisibleRecord<T> = Record<T>;

/// Undetected jumps of a trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HiddenRecord<T> {
    pub events: Vec<JumpEvent<T>>,
}

impl<T> HiddenRecord<T> {
    pub fn empty() -> Self {
        HiddenRecord { events: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

fn check_events<T: Real>(events: &[JumpEvent<T>], tau: T, channels: usize) -> Result<()> {
    let eps = T::tol(1e-12) * (T::one() + tau);
    let mut prev: Option<T> = None;
    for ev in events {
        if ev.channel >= channels {
            return Err(Error::UnknownChannel(ev.channel));
        }
        if ev.time < -eps || ev.time > tau + eps || !ev.time.is_finite_value() {
            return Err(Error::InvalidRecord(format!(
                "jump time {} outside [0, {}]",
                ev.time.as_f64(),
                tau.as_f64()
            )));
        }
        if let Some(p) = prev {
            if ev.time <= p {
                return Err(Error::InvalidRecord(format!(
                    "jump times not strictly increasing at {}",
                    ev.time.as_f64()
                )));
            }
        }
        prev = Some(ev.time);
    }
    Ok(())
}

impl<T: Real> Record<T> {
    pub fn new(initial: usize, events: Vec<JumpEvent<T>>, final_outcome: usize, tau: T) -> Self {
        Record {
            initial,
            events,
            final_outcome,
            tau,
        }
    }

    pub fn jump_count(&self) -> usize {
        self.events.len()
    }

    /// Checks outcomes, channels, time ordering and that `tau` matches the model.
    pub fn validate(&self, model: &Model<T>) -> Result<()> {
        if self.initial >= model.dim || self.final_outcome >= model.dim {
            return Err(Error::InvalidRecord(format!(
                "outcomes ({}, {}) outside basis of dimension {}",
                self.initial, self.final_outcome, model.dim
            )));
        }
        let tau = model.tau();
        if (self.tau - tau).abs() > T::tol(1e-9) * (T::one() + tau) {
            return Err(Error::InvalidRecord(format!(
                "record duration {} != protocol {}",
                self.tau.as_f64(),
                tau.as_f64()
            )));
        }
        check_events(&self.events, tau, model.channels.len())
    }

    /// Jump events in reverse order at times `τ − t`, channel labels kept.
    pub fn reversed_events(&self) -> Vec<JumpEvent<T>> {
        self.events
            .iter()
            .rev()
            .map(|e| JumpEvent {
                time: self.tau - e.time,
                channel: e.channel,
            })
            .collect()
    }

    /// The same record with its jump list replaced.
    pub fn with_events(&self, events: Vec<JumpEvent<T>>) -> Self {
        Record {
            initial: self.initial,
            events,
            final_outcome: self.final_outcome,
            tau: self.tau,
        }
    }
}

/// Union of visible and hidden jumps, ordered in time.
pub fn merge<T: Real>(
    visible: &VisibleRecord<T>,
    hidden: &HiddenRecord<T>,
) -> Result<FullRecord<T>> {
    let mut events = Vec::with_capacity(visible.events.len() + hidden.events.len());
    let (mut i, mut j) = (0, 0);
    while i < visible.events.len() || j < hidden.events.len() {
        let take_visible = match (visible.events.get(i), hidden.events.get(j)) {
            (Some(v), Some(h)) => {
                if v.time == h.time {
                    return Err(Error::InvalidRecord(format!(
                        "visible and hidden jumps coincide at {}",
                        v.time.as_f64()
                    )));
                }
                v.time < h.time
            }
            (Some(_), None) => true,
            _ => false,
        };
        if take_visible {
            events.push(visible.events[i]);
            i += 1;
        } else {
            events.push(hidden.events[j]);
            j += 1;
        }
    }
    for w in events.windows(2) {
        if w[1].time <= w[0].time {
            return Err(Error::InvalidRecord(format!(
                "jump times not strictly increasing at {}",
                w[1].time.as_f64()
            )));
        }
    }
    Ok(visible.with_events(events))
}

/// Formats `x` with 12 significant digits, trailing zeros removed.
pub fn format_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

impl<T: Real> fmt::Display for Record<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |", self.initial)?;
        for ev in &self.events {
            write!(
                f,
                " {}:{}",
                format_significant(ev.time.as_f64()),
                ev.channel
            )?;
        }
        write!(
            f,
            " | {} | {}",
            self.final_outcome,
            format_significant(self.tau.as_f64())
        )
    }
}

impl<T: Real> fmt::Display for HiddenRecord<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .events
            .iter()
            .map(|e| format!("{}:{}", format_significant(e.time.as_f64()), e.channel))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

fn parse_number<N: FromStr>(s: &str, what: &str) -> Result<N> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid {what} `{}`", s.trim())))
}

impl<T: Real> FromStr for Record<T> {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 `|`-separated fields, found {}",
                fields.len()
            )));
        }
        let initial = parse_number(fields[0], "initial outcome")?;
        let final_outcome = parse_number(fields[2], "final outcome")?;
        let tau: f64 = parse_number(fields[3], "duration")?;
        let mut events = Vec::new();
        for tok in fields[1].split_whitespace() {
            let (t, k) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("event `{tok}` lacks `:`")))?;
            let time: f64 = parse_number(t, "jump time")?;
            events.push(JumpEvent {
                time: T::lit(time),
                channel: parse_number(k, "channel")?,
            });
        }
        let tau = T::lit(tau);
        check_events(&events, tau, usize::MAX)?;
        Ok(Record {
            initial,
            events,
            final_outcome,
            tau,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(time: f64, channel: usize) -> JumpEvent<f64> {
        JumpEvent { time, channel }
    }

    #[test]
    fn line_format_round_trip() {
        let r = Record::new(1, vec![ev(0.05, 0), ev(0.333333333333333, 1)], 0, 1.0);
        let line = r.to_string();
        assert_eq!(line, "1 | 0.05:0 0.333333333333:1 | 0 | 1");
        let back: Record<f64> = line.parse().unwrap();
        assert_eq!(back.initial, 1);
        assert_eq!(back.events.len(), 2);
        assert!((back.events[1].time - 0.333333333333333).abs() < 1e-11);
        let empty: Record<f64> = "0 |  | 1 | 0.5".parse().unwrap();
        assert!(empty.events.is_empty());
    }

    #[test]
    fn parse_errors() {
        assert!("0 | 1 | 0.5".parse::<Record<f64>>().is_err());
        assert!("0 | 0.2 | 0 | 1".parse::<Record<f64>>().is_err());
        assert!("0 | 0.3:0 0.2:1 | 0 | 1".parse::<Record<f64>>().is_err());
        assert!("x | | 0 | 1".parse::<Record<f64>>().is_err());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(1.0), "1");
        assert_eq!(format_significant(0.1 + 0.2), "0.3");
        assert_eq!(format_significant(123456.7890123456), "123456.789012");
        assert_eq!(format_significant(1.5e-9), "1.50000000000e-9");
    }

    #[test]
    fn merge_interleaves_and_rejects_collisions() {
        let v = Record::new(0, vec![ev(0.2, 0), ev(0.6, 1)], 1, 1.0);
        let h = HiddenRecord {
            events: vec![ev(0.1, 1), ev(0.4, 0)],
        };
        let full = merge(&v, &h).unwrap();
        let times: Vec<f64> = full.events.iter().map(|e| e.time).collect();
        assert_eq!(times, vec![0.1, 0.2, 0.4, 0.6]);
        let clash = HiddenRecord {
            events: vec![ev(0.2, 1)],
        };
        assert!(merge(&v, &clash).is_err());
    }

    #[test]
    fn reversed_events_flip_time() {
        let r = Record::new(0, vec![ev(0.2, 0), ev(0.7, 1)], 1, 1.0);
        let rev = r.reversed_events();
        assert_eq!(rev[0].channel, 1);
        assert!((rev[0].time - 0.3).abs() < 1e-15);
        assert!((rev[1].time - 0.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn merge_then_split_is_identity(mut times in proptest::collection::vec(0.0f64..1.0, 0..12), mask in proptest::collection::vec(any::<bool>(), 12)) {
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times.dedup();
            let events: Vec<_> = times.iter().enumerate().map(|(i, &t)| ev(t, i % 2)).collect();
            let visible: Vec<_> = events.iter().zip(&mask).filter(|(_, &m)| m).map(|(e, _)| *e).collect();
            let hidden: Vec<_> = events.iter().zip(&mask).filter(|(_, &m)| !m).map(|(e, _)| *e).collect();
            let v = Record::new(0, visible, 1, 1.0);
            let full = merge(&v, &HiddenRecord { events: hidden }).unwrap();
            prop_assert_eq!(full.events, events);
        }

        #[test]
        fn text_round_trip(times in proptest::collection::btree_set(0u32..1_000_000, 0..8), n in 0usize..2, m in 0usize..2) {
            let events: Vec<_> = times.iter().map(|&t| ev(t as f64 / 1e6 * 3.0, (t % 2) as usize)).collect();
            let r = Record::new(n, events, m, 3.0);
            let back: Record<f64> = r.to_string().parse().unwrap();
            prop_assert_eq!(back.events.len(), r.events.len());
            for (a, b) in back.events.iter().zip(&r.events) {
                prop_assert!((a.time - b.time).abs() <= 1e-11 * b.time.abs().max(1e-300));
                prop_assert_eq!(a.channel, b.channel);
            }
        }
    }
}
