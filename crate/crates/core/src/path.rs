//! Epidemic paths: compartment states, jump events and their evaluation.
//!
//! A continuous-time path is stored as its event list. Every quantity the
//! estimators need (state at a time, extinction time, running maxima, final
//! size) is an exact function of that list.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct CompartmentState {
    pub s: u64,
    pub i: u64,
    pub r: u64,
}

impl CompartmentState {
    pub const fn new(s: u64, i: u64, r: u64) -> Self {
        CompartmentState { s, i, r }
    }

    pub fn total(&self) -> u64 {
        self.s + self.i + self.r
    }

    /// State after a jump of the given kind, or `None` if the jump is
    /// impossible from here.
    pub fn after(&self, kind: EventKind) -> Option<Self> {
        match kind {
            EventKind::Infection if self.s > 0 && self.i > 0 => Some(CompartmentState {
                s: self.s - 1,
                i: self.i + 1,
                r: self.r,
            }),
            EventKind::Removal | EventKind::Detection if self.i > 0 => Some(CompartmentState {
                s: self.s,
                i: self.i - 1,
                r: self.r + 1,
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Infection = 1,
    Removal = 2,
    /// Removal by diagnosis in the contact-tracing model.
    Detection = 3,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Infection => "INFECTION",
            EventKind::Removal => "REMOVAL",
            EventKind::Detection => "DETECTION",
        }
    }

    fn parse(label: &str) -> Option<Self> {
        match label {
            "INFECTION" => Some(EventKind::Infection),
            "REMOVAL" => Some(EventKind::Removal),
            "DETECTION" => Some(EventKind::Detection),
            _ => None,
        }
    }

    pub fn is_removal(self) -> bool {
        !matches!(self, EventKind::Infection)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub kind: EventKind,
    pub state_after: CompartmentState,
}

/// A stopping time with the convention `inf ∅ = +∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StoppingTime {
    Finite(f64),
    Infinite,
}

impl StoppingTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            StoppingTime::Finite(t) => Some(t),
            StoppingTime::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, StoppingTime::Infinite)
    }

    /// `self <= t`, treating `Infinite` as larger than every real.
    pub fn at_most(self, t: f64) -> bool {
        matches!(self, StoppingTime::Finite(x) if x <= t)
    }

    /// `self > t`.
    pub fn exceeds(self, t: f64) -> bool {
        !self.at_most(t)
    }
}

impl PartialOrd for StoppingTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use StoppingTime::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (Finite(_), Infinite) => Some(Ordering::Less),
            (Infinite, Finite(_)) => Some(Ordering::Greater),
            (Infinite, Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for StoppingTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoppingTime::Finite(t) => write!(f, "{t}"),
            StoppingTime::Infinite => f.write_str("inf"),
        }
    }
}

/// One realization of a continuous-time epidemic.
///
/// `horizon` is the largest time up to which the path is fully known. Once
/// the path is absorbed (`i = 0`) nothing can happen any more and the horizon
/// is `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpidemicPath {
    initial: CompartmentState,
    events: Vec<JumpEvent>,
    horizon: f64,
    initial_detections: Vec<f64>,
}

impl EpidemicPath {
    /// Path known only at time 0.
    pub fn new(initial: CompartmentState) -> Self {
        let horizon = if initial.i == 0 { f64::INFINITY } else { 0.0 };
        EpidemicPath {
            initial,
            events: Vec::new(),
            horizon,
            initial_detections: Vec::new(),
        }
    }

    /// As [`EpidemicPath::new`], with detection times prior to `t = 0`
    /// (non-positive) for the contact-tracing model.
    pub fn with_detections(initial: CompartmentState, detections: Vec<f64>) -> Result<Self> {
        if detections.iter().any(|d| !(d.is_finite() && *d <= 0.0)) {
            return Err(Error::param(
                "initial detection times must be finite and <= 0",
            ));
        }
        let mut p = Self::new(initial);
        p.initial_detections = detections;
        Ok(p)
    }

    /// Builds a path from a full event list, checking every invariant.
    pub fn from_events(
        initial: CompartmentState,
        events: Vec<JumpEvent>,
        horizon: f64,
    ) -> Result<Self> {
        let mut p = Self::new(initial);
        for e in events {
            p.push(e.time, e.kind)?;
            if p.events.last().map(|x| x.state_after) != Some(e.state_after) {
                return Err(Error::param(format!(
                    "event at t = {} does not close the compartment bookkeeping",
                    e.time
                )));
            }
        }
        if !p.is_absorbed() {
            if horizon < p.end_time() {
                return Err(Error::param("horizon precedes the last event"));
            }
            p.horizon = horizon;
        }
        Ok(p)
    }

    pub fn initial(&self) -> CompartmentState {
        self.initial
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// State after the last recorded event.
    pub fn current_state(&self) -> CompartmentState {
        self.events.last().map_or(self.initial, |e| e.state_after)
    }

    /// Time of the last recorded event (0 for an empty path).
    pub fn end_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time)
    }

    pub fn is_absorbed(&self) -> bool {
        self.current_state().i == 0
    }

    /// Number of initially susceptible plus initially infective individuals
    /// ever infected by the end of the record: `i0 + (s0 - s)`.
    pub fn ever_infected(&self) -> u64 {
        ever_infected(self.initial, self.current_state())
    }

    pub(crate) fn push(&mut self, time: f64, kind: EventKind) -> Result<()> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::param(format!(
                "event time {time} is not a finite non-negative real"
            )));
        }
        if let Some(last) = self.events.last() {
            if time <= last.time {
                return Err(Error::param(format!(
                    "event times must increase strictly ({time} after {})",
                    last.time
                )));
            }
        }
        let from = self.current_state();
        let state_after = from.after(kind).ok_or_else(|| {
            Error::param(format!("{} impossible from state {from:?}", kind.label()))
        })?;
        self.events.push(JumpEvent {
            time,
            kind,
            state_after,
        });
        self.horizon = if state_after.i == 0 {
            f64::INFINITY
        } else {
            time
        };
        Ok(())
    }

    pub(crate) fn extend_horizon(&mut self, t: f64) {
        if t > self.horizon {
            self.horizon = t;
        }
    }

    /// The state `Z(t)` of the right-continuous path.
    pub fn state_at(&self, t: f64) -> Result<CompartmentState> {
        if t > self.horizon {
            return Err(Error::NotSimulated {
                requested: t,
                horizon: self.horizon,
            });
        }
        let n = self.events_until(t);
        Ok(if n == 0 {
            self.initial
        } else {
            self.events[n - 1].state_after
        })
    }

    /// `N(t)`: number of events with time `<= t`.
    pub fn events_until(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// `τ = inf{t >= 0 : I(t) = 0}`; `Infinite` if the path is still active
    /// at its horizon.
    pub fn extinction_time(&self) -> StoppingTime {
        if self.initial.i == 0 {
            return StoppingTime::Finite(0.0);
        }
        self.events
            .iter()
            .find(|e| e.state_after.i == 0)
            .map_or(StoppingTime::Infinite, |e| StoppingTime::Finite(e.time))
    }

    /// Prefix of the path up to and including time `t`, known up to `t`.
    pub fn truncated(&self, t: f64) -> EpidemicPath {
        let n = self.events_until(t);
        let events = self.events[..n].to_vec();
        let absorbed = events
            .last()
            .map_or(self.initial.i == 0, |e| e.state_after.i == 0);
        EpidemicPath {
            initial: self.initial,
            events,
            horizon: if absorbed {
                f64::INFINITY
            } else {
                t.min(self.horizon)
            },
            initial_detections: self.initial_detections.clone(),
        }
    }

    /// Detection times (absolute) recorded up to the end of the path,
    /// including detections prior to `t = 0`.
    pub fn detection_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.initial_detections.iter().copied().chain(
            self.events
                .iter()
                .filter(|e| e.kind == EventKind::Detection)
                .map(|e| e.time),
        )
    }

    pub fn initial_detections(&self) -> &[f64] {
        &self.initial_detections
    }

    /// Writes the path as CSV: header `time,kind,s,i,r`, one `INIT` row at
    /// time 0, then one row per event.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "kind", "s", "i", "r"])?;
        let s0 = self.initial;
        w.write_record([
            "0",
            "INIT",
            &s0.s.to_string(),
            &s0.i.to_string(),
            &s0.r.to_string(),
        ])?;
        for e in &self.events {
            let st = e.state_after;
            w.write_record([
                e.time.to_string().as_str(),
                e.kind.label(),
                &st.s.to_string(),
                &st.i.to_string(),
                &st.r.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Parses the format written by [`EpidemicPath::write_csv`]. The horizon
    /// of the result is the last event time (or `+inf` if absorbed).
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["time", "kind", "s", "i", "r"] {
            return Err(Error::param("path csv header must be time,kind,s,i,r"));
        }
        let mut initial = None;
        let mut events = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::param(format!("path csv row {}: bad {what}", line + 1));
            let time: f64 = rec[0].parse().map_err(|_| bad("time"))?;
            let num = |k: usize, what: &str| rec[k].parse::<u64>().map_err(|_| bad(what));
            let state = CompartmentState::new(num(2, "s")?, num(3, "i")?, num(4, "r")?);
            if &rec[1] == "INIT" {
                if initial.is_some() || line != 0 || time != 0.0 {
                    return Err(bad("INIT row (must be the first row, at time 0)"));
                }
                initial = Some(state);
                continue;
            }
            let kind = EventKind::parse(&rec[1]).ok_or_else(|| bad("kind"))?;
            events.push(JumpEvent {
                time,
                kind,
                state_after: state,
            });
        }
        let initial = initial.ok_or_else(|| Error::param("path csv has no INIT row"))?;
        let horizon = events.last().map_or(0.0, |e| e.time);
        Self::from_events(initial, events, horizon)
    }
}

pub(crate) fn ever_infected(initial: CompartmentState, now: CompartmentState) -> u64 {
    initial.i + (initial.s - now.s)
}

/// A Reed-Frost chain `(S_t, I_t)` for generations `t = 0..=t_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationPath {
    pub s: Vec<u64>,
    pub i: Vec<u64>,
}

impl GenerationPath {
    pub fn start(s0: u64, i0: u64) -> Self {
        GenerationPath {
            s: vec![s0],
            i: vec![i0],
        }
    }

    /// Number of recorded generations (`t_max + 1`).
    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    /// `Σ_{k<t} I_k`, or `None` if generation `t - 1` has not been simulated.
    pub fn cumulative_infections(&self, t: usize) -> Option<u64> {
        (t <= self.i.len()).then(|| self.i[..t].iter().sum())
    }

    pub(crate) fn push(&mut self, s: u64, i: u64) {
        self.s.push(s);
        self.i.push(i);
    }

    pub fn last(&self) -> (u64, u64) {
        (*self.s.last().unwrap(), *self.i.last().unwrap())
    }

    /// CSV in the event-path layout: one `GEN` row per generation with
    /// `r` the number of earlier infectives.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "kind", "s", "i", "r"])?;
        let mut removed = 0u64;
        for (t, (s, i)) in self.s.iter().zip(&self.i).enumerate() {
            let kind = if t == 0 { "INIT" } else { "GEN" };
            w.write_record([
                t.to_string().as_str(),
                kind,
                &s.to_string(),
                &i.to_string(),
                &removed.to_string(),
            ])?;
            removed += i;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(initial: (u64, u64, u64), events: &[(f64, EventKind)], horizon: f64) -> EpidemicPath {
        let mut p = EpidemicPath::new(CompartmentState::new(initial.0, initial.1, initial.2));
        for &(t, k) in events {
            p.push(t, k).unwrap();
        }
        p.extend_horizon(horizon);
        p
    }

    use EventKind::*;

    #[test]
    fn state_at_empty_path_is_initial() {
        let p = path((9, 1, 0), &[], 5.0);
        assert_eq!(p.state_at(5.0).unwrap(), CompartmentState::new(9, 1, 0));
    }

    #[test]
    fn state_at_is_inclusive_at_event_time() {
        let p = path((9, 1, 0), &[(1.0, Infection)], 3.0);
        assert_eq!(p.state_at(1.0).unwrap(), CompartmentState::new(8, 2, 0));
    }

    #[test]
    fn state_at_between_events_matches_linear_scan() {
        let p = path((9, 1, 0), &[(1.0, Infection), (2.0, Removal)], 3.0);
        let t = 1.5;
        let scan = p
            .events()
            .iter()
            .rev()
            .find(|e| e.time <= t)
            .map_or(p.initial(), |e| e.state_after);
        assert_eq!(scan, CompartmentState::new(8, 2, 0));
        assert_eq!(p.state_at(t).unwrap(), scan);
    }

    #[test]
    fn state_at_beyond_horizon_fails() {
        let p = path((9, 1, 0), &[(1.0, Infection)], 2.0);
        assert!(matches!(p.state_at(2.5), Err(Error::NotSimulated { .. })));
    }

    #[test]
    fn extinction_time_examples() {
        let p = path((0, 1, 0), &[(0.7, Removal)], 0.7);
        assert_eq!(p.extinction_time(), StoppingTime::Finite(0.7));
        assert_eq!(p.horizon(), f64::INFINITY);

        let p = path((9, 1, 0), &[(1.0, Infection)], 10.0);
        assert_eq!(p.state_at(10.0).unwrap().i, 2);
        assert_eq!(p.extinction_time(), StoppingTime::Infinite);

        // i trace 1 -> 2 -> 1 -> 0
        let p = path(
            (1, 1, 0),
            &[(0.3, Infection), (0.9, Removal), (1.4, Removal)],
            2.0,
        );
        assert_eq!(p.extinction_time(), StoppingTime::Finite(1.4));
    }

    #[test]
    fn no_event_after_absorption() {
        let mut p = path((3, 1, 0), &[(0.5, Removal)], 0.5);
        assert!(p.push(0.6, Infection).is_err());
        assert!(p.push(0.6, Removal).is_err());
    }

    #[test]
    fn times_must_increase() {
        let mut p = path((3, 1, 0), &[(0.5, Infection)], 0.5);
        assert!(p.push(0.5, Removal).is_err());
    }

    #[test]
    fn truncation_keeps_events_up_to_t() {
        let p = path(
            (5, 1, 0),
            &[(0.5, Infection), (1.0, Infection), (1.5, Removal)],
            2.0,
        );
        let q = p.truncated(1.0);
        assert_eq!(q.events().len(), 2);
        assert_eq!(q.horizon(), 1.0);
        assert_eq!(q.current_state(), CompartmentState::new(3, 3, 0));
    }

    #[test]
    fn csv_rejects_broken_bookkeeping() {
        let text = "time,kind,s,i,r\n0,INIT,2,1,0\n0.5,INFECTION,1,1,0\n";
        assert!(EpidemicPath::read_csv(text.as_bytes()).is_err());
        let text = "time,kind,s,i,r\n0.5,INFECTION,1,2,0\n";
        assert!(EpidemicPath::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn generation_csv_layout() {
        let g = GenerationPath {
            s: vec![10, 7, 7],
            i: vec![1, 3, 0],
        };
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,kind,s,i,r\n0,INIT,10,1,0\n1,GEN,7,3,1\n2,GEN,7,0,4\n"
        );
        assert_eq!(g.cumulative_infections(2), Some(4));
        assert_eq!(g.cumulative_infections(4), None);
    }

    fn arb_path() -> impl Strategy<Value = EpidemicPath> {
        (
            0u64..6,
            1u64..4,
            proptest::collection::vec((0.01f64..1.0, any::<bool>()), 0..30),
        )
            .prop_map(|(s0, i0, steps)| {
                let mut p = EpidemicPath::new(CompartmentState::new(s0, i0, 0));
                let mut t = 0.0;
                for (dt, infect) in steps {
                    if p.is_absorbed() {
                        break;
                    }
                    t += dt;
                    let kind = if infect && p.current_state().s > 0 {
                        Infection
                    } else {
                        Removal
                    };
                    p.push(t, kind).unwrap();
                }
                p.extend_horizon(t + 1.0);
                p
            })
    }

    proptest! {
        #[test]
        fn bookkeeping_closes(p in arb_path()) {
            let mut st = p.initial();
            for e in p.events() {
                st = st.after(e.kind).unwrap();
                prop_assert_eq!(st, e.state_after);
                prop_assert_eq!(st.total(), p.initial().total());
            }
        }

        #[test]
        fn state_at_is_right_continuous(p in arb_path()) {
            let mut prev = p.initial();
            for e in p.events() {
                prop_assert_eq!(p.state_at(e.time).unwrap(), e.state_after);
                let before = e.time - 1e-9;
                if before >= 0.0 {
                    prop_assert_eq!(p.state_at(before).unwrap(), prev);
                }
                prev = e.state_after;
            }
        }

        #[test]
        fn csv_round_trip(p in arb_path()) {
            let text = p.to_csv_string().unwrap();
            let q = EpidemicPath::read_csv(text.as_bytes()).unwrap();
            prop_assert_eq!(q.initial(), p.initial());
            prop_assert_eq!(q.events(), p.events());
        }
    }
}
