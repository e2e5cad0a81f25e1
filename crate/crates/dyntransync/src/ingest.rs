//! Turning raw rating and match records into comparison observations.
//!
//! Two recipes are supported:
//!
//! * **ratings** — rows `date,item,user,score` (dates `YYYY-MM-DD`, grouped
//!   into calendar months). Within a merged window, an item's score is the
//!   unweighted mean of its ratings and an edge appears between every pair
//!   of items scored in the window, carrying the mean-score difference.
//! * **matches** — rows `season,home,away,home_goals,away_goals`. Within a
//!   season, `s_i` against `j` is the mean number of goals `i` scored in
//!   their meetings; a window averages the per-season differences over the
//!   seasons in which the pair actually met.
//!
//! String ids are interned to dense indices in first-appearance order and
//! the mapping is emitted alongside the outputs.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphseq::{GraphSequence, ObservationSet, UnionFind};

/// One scored event: a rating, or one side of a match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    /// Month index or season index, zero-based within the dataset.
    pub time_unit: usize,
    /// Interned item id.
    pub item: usize,
    /// The opponent, for match data.
    pub counterpart: Option<usize>,
    /// Rating value or goals scored.
    pub score: f64,
}

/// Interned item ids, dense and in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemMap {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl ItemMap {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.lookup.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    /// Writes the mapping as CSV with header `id,name`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "name"])?;
        for (id, name) in self.names.iter().enumerate() {
            w.write_record(&[id.to_string(), name.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn expect_headers(record: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let have: Vec<&str> = record.iter().map(str::trim).collect();
    if have != want {
        return Err(Error::Parse(format!(
            "expected header {}, got {}",
            want.join(","),
            have.join(",")
        )));
    }
    Ok(())
}

fn parse_score(text: &str) -> Result<f64> {
    let value: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad score {text:?}")))?;
    if !value.is_finite() {
        return Err(Error::Parse(format!("score {value} is not finite")));
    }
    Ok(value)
}

/// Reads `date,item,user,score` rating rows; dates collapse to month
/// indices counted from the earliest month in the data.
pub fn read_ratings_csv<R: Read>(reader: R) -> Result<(Vec<ScoreRecord>, ItemMap)> {
    let mut r = csv::Reader::from_reader(reader);
    expect_headers(r.headers()?, &["date", "item", "user", "score"])?;
    let mut map = ItemMap::default();
    let mut raw = Vec::new();
    for row in r.records() {
        let row = row?;
        let date = chrono::NaiveDate::parse_from_str(row[0].trim(), "%Y-%m-%d")
            .map_err(|_| Error::Parse(format!("bad date {:?} (want YYYY-MM-DD)", &row[0])))?;
        let month = {
            use chrono::Datelike;
            date.year() as i64 * 12 + date.month0() as i64
        };
        let item = map.intern(row[1].trim());
        let score = parse_score(&row[3])?;
        raw.push((month, item, score));
    }
    if raw.is_empty() {
        return Err(Error::Parse("no rating records".into()));
    }
    let first_month = raw.iter().map(|&(m, _, _)| m).min().unwrap();
    let records = raw
        .into_iter()
        .map(|(month, item, score)| ScoreRecord {
            time_unit: (month - first_month) as usize,
            item,
            counterpart: None,
            score,
        })
        .collect();
    Ok((records, map))
}

/// Reads `season,home,away,home_goals,away_goals` match rows; every match
/// yields two records (one per side). Seasons collapse to indices counted
/// from the earliest season.
pub fn read_matches_csv<R: Read>(reader: R) -> Result<(Vec<ScoreRecord>, ItemMap)> {
    let mut r = csv::Reader::from_reader(reader);
    expect_headers(
        r.headers()?,
        &["season", "home", "away", "home_goals", "away_goals"],
    )?;
    let mut map = ItemMap::default();
    let mut raw = Vec::new();
    for row in r.records() {
        let row = row?;
        let season: i64 = row[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad season {:?}", &row[0])))?;
        let home = map.intern(row[1].trim());
        let away = map.intern(row[2].trim());
        if home == away {
            return Err(Error::Parse(format!("team {:?} plays itself", &row[1])));
        }
        let home_goals = parse_score(&row[3])?;
        let away_goals = parse_score(&row[4])?;
        raw.push((season, home, Some(away), home_goals));
        raw.push((season, away, Some(home), away_goals));
    }
    if raw.is_empty() {
        return Err(Error::Parse("no match records".into()));
    }
    let first = raw.iter().map(|&(s, _, _, _)| s).min().unwrap();
    let records = raw
        .into_iter()
        .map(|(season, item, counterpart, score)| ScoreRecord {
            time_unit: (season - first) as usize,
            item,
            counterpart,
            score,
        })
        .collect();
    Ok((records, map))
}

/// Keeps the `keep` items with the most records (ties broken by name) and
/// re-interns the survivors in first-appearance order. Match records lose
/// both sides when either side is dropped.
pub fn filter_top_items(
    records: &[ScoreRecord],
    map: &ItemMap,
    keep: usize,
) -> (Vec<ScoreRecord>, ItemMap) {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for rec in records {
        *counts.entry(rec.item).or_default() += 1;
    }
    let mut ranked: Vec<(usize, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| map.name(a.0).cmp(map.name(b.0))));
    let kept: std::collections::HashSet<usize> =
        ranked.into_iter().take(keep).map(|(id, _)| id).collect();

    let mut new_map = ItemMap::default();
    let mut filtered = Vec::new();
    for rec in records {
        if !kept.contains(&rec.item) {
            continue;
        }
        if let Some(cp) = rec.counterpart {
            if !kept.contains(&cp) {
                continue;
            }
        }
        filtered.push(ScoreRecord {
            time_unit: rec.time_unit,
            item: new_map.intern(map.name(rec.item)),
            counterpart: rec.counterpart.map(|cp| new_map.intern(map.name(cp))),
            score: rec.score,
        });
    }
    (filtered, new_map)
}

/// One merged window: the inclusive raw-unit range `[start, end]` and
/// whether its comparison graph is connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeWindow {
    pub start: usize,
    pub end: usize,
    pub connected: bool,
}

/// An ordered, contiguous, disjoint partition of the raw time units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergePlan {
    pub windows: Vec<MergeWindow>,
}

impl MergePlan {
    /// Uniform plan: each raw unit is its own window (flags unset).
    pub fn one_per_unit(range: (usize, usize)) -> Self {
        Self {
            windows: (range.0..=range.1)
                .map(|u| MergeWindow {
                    start: u,
                    end: u,
                    connected: true,
                })
                .collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.windows.len().saturating_sub(1)
    }

    pub fn window_of(&self, unit: usize) -> Option<usize> {
        self.windows
            .iter()
            .position(|w| w.start <= unit && unit <= w.end)
    }

    /// Checks cover, contiguity and disjointness against a unit range.
    pub fn validate(&self, range: (usize, usize)) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::InvalidArgument("merge plan has no windows".into()));
        }
        if self.windows[0].start != range.0 || self.windows.last().unwrap().end != range.1 {
            return Err(Error::InvalidArgument(format!(
                "plan spans [{}, {}] but the records span [{}, {}]",
                self.windows[0].start,
                self.windows.last().unwrap().end,
                range.0,
                range.1
            )));
        }
        for w in &self.windows {
            if w.start > w.end {
                return Err(Error::InvalidArgument(format!(
                    "window [{}, {}] is reversed",
                    w.start, w.end
                )));
            }
        }
        for pair in self.windows.windows(2) {
            if pair[1].start != pair[0].end + 1 {
                return Err(Error::InvalidArgument(format!(
                    "windows [{},{}] and [{},{}] are not contiguous",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        Ok(())
    }
}

fn unit_range(records: &[ScoreRecord]) -> Result<(usize, usize)> {
    let min = records.iter().map(|r| r.time_unit).min();
    let max = records.iter().map(|r| r.time_unit).max();
    match (min, max) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => Err(Error::InvalidArgument("no records".into())),
    }
}

/// Whether the co-scoring graph of a window is connected over all
/// `n_items` vertices: every item present and the present items mutually
/// linked (ratings-style windows are complete on the present items).
fn ratings_window_connected(present: &[bool]) -> bool {
    present.iter().all(|&p| p)
}

/// Greedy merge for rating data: append successive raw units until the
/// window's comparison graph over the full item universe is connected,
/// then close it. The last window may close unconnected (flagged); raw
/// units past the last record-bearing unit fold into the previous window.
pub fn plan_merge_until_connected(
    records: &[ScoreRecord],
    n_items: usize,
    range: Option<(usize, usize)>,
) -> Result<MergePlan> {
    let data_range = unit_range(records)?;
    let range = range.unwrap_or(data_range);
    if range.0 > data_range.0 || range.1 < data_range.1 {
        return Err(Error::InvalidArgument(format!(
            "explicit range [{}, {}] does not cover the records' range [{}, {}]",
            range.0, range.1, data_range.0, data_range.1
        )));
    }

    let mut per_unit_items: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for rec in records {
        per_unit_items
            .entry(rec.time_unit)
            .or_default()
            .push(rec.item);
    }

    let mut windows = Vec::new();
    let mut present = vec![false; n_items];
    let mut start = range.0;
    let mut window_has_records = false;
    for unit in range.0..=range.1 {
        if let Some(items) = per_unit_items.get(&unit) {
            window_has_records = true;
            for &item in items {
                present[item] = true;
            }
        }
        if window_has_records && ratings_window_connected(&present) {
            windows.push(MergeWindow {
                start,
                end: unit,
                connected: true,
            });
            start = unit + 1;
            present.fill(false);
            window_has_records = false;
        }
    }
    if start <= range.1 {
        if window_has_records {
            windows.push(MergeWindow {
                start,
                end: range.1,
                connected: ratings_window_connected(&present),
            });
        } else if let Some(last) = windows.last_mut() {
            // trailing units without records fold into the previous window
            last.end = range.1;
        } else {
            return Err(Error::InvalidArgument(
                "no records in the requested range".into(),
            ));
        }
    }
    Ok(MergePlan { windows })
}

fn check_plan(records: &[ScoreRecord], plan: &MergePlan) -> Result<()> {
    let range = unit_range(records)?;
    let lo = plan.windows[0].start.min(range.0);
    let hi = plan.windows.last().unwrap().end.max(range.1);
    plan.validate((lo, hi))?;
    if lo != plan.windows[0].start || hi != plan.windows.last().unwrap().end {
        return Err(Error::InvalidArgument(
            "plan does not cover the records".into(),
        ));
    }
    Ok(())
}

/// Builds observations from rating records: per window, an item's score is
/// the unweighted mean of its ratings, every co-scored pair gets an edge,
/// and the value is the mean-score difference.
pub fn build_observations_ratings(
    records: &[ScoreRecord],
    n_items: usize,
    plan: &MergePlan,
) -> Result<ObservationSet> {
    check_plan(records, plan)?;
    let windows = plan.windows.len();
    let mut sums = vec![BTreeMap::<usize, (f64, usize)>::new(); windows];
    for rec in records {
        let w = plan
            .window_of(rec.time_unit)
            .ok_or_else(|| Error::InvalidArgument("record outside the plan".into()))?;
        if rec.item >= n_items {
            return Err(Error::Dimension(format!(
                "item id {} out of range for n={n_items}",
                rec.item
            )));
        }
        let slot = sums[w].entry(rec.item).or_insert((0.0, 0));
        slot.0 += rec.score;
        slot.1 += 1;
    }

    let mut edges = Vec::with_capacity(windows);
    let mut values = Vec::with_capacity(windows);
    for (w, window_sums) in sums.iter().enumerate() {
        if window_sums.is_empty() {
            return Err(Error::Precondition(format!(
                "window {w} contains no records"
            )));
        }
        let means: Vec<(usize, f64)> = window_sums
            .iter()
            .map(|(&item, &(sum, count))| (item, sum / count as f64))
            .collect();
        let mut window_edges = Vec::new();
        let mut window_values = Vec::new();
        for (a, &(i, si)) in means.iter().enumerate() {
            for &(j, sj) in means.iter().skip(a + 1) {
                window_edges.push((i, j));
                window_values.push(si - sj);
            }
        }
        edges.push(window_edges);
        values.push(window_values);
    }
    ObservationSet::new(GraphSequence::new(n_items, edges)?, values)
}

/// Builds observations from match records: within a season, `s_i` against
/// `j` is the mean number of goals `i` scored in their meetings; a window
/// averages `s_i - s_j` over the seasons in which the pair met (seasons
/// without a meeting contribute nothing).
pub fn build_observations_matches(
    records: &[ScoreRecord],
    n_items: usize,
    plan: &MergePlan,
) -> Result<ObservationSet> {
    check_plan(records, plan)?;
    // (season, item, opponent) -> (goal sum, meetings)
    let mut per_season: BTreeMap<(usize, usize, usize), (f64, usize)> = BTreeMap::new();
    for rec in records {
        let against = rec
            .counterpart
            .ok_or_else(|| Error::InvalidArgument("match record lacks a counterpart".into()))?;
        if rec.item >= n_items || against >= n_items {
            return Err(Error::Dimension(format!(
                "item ids ({}, {against}) out of range for n={n_items}",
                rec.item
            )));
        }
        let slot = per_season
            .entry((rec.time_unit, rec.item, against))
            .or_insert((0.0, 0));
        slot.0 += rec.score;
        slot.1 += 1;
    }

    let windows = plan.windows.len();
    let mut any_record = vec![false; windows];
    // per window: (i, j) -> (sum of per-season differences, season count)
    let mut diffs = vec![BTreeMap::<(usize, usize), (f64, usize)>::new(); windows];
    for (&(season, i, j), &(sum, count)) in &per_season {
        if i > j {
            continue; // handled when visiting the mirrored record
        }
        let w = plan
            .window_of(season)
            .ok_or_else(|| Error::InvalidArgument("record outside the plan".into()))?;
        any_record[w] = true;
        let s_i = sum / count as f64;
        let &(back_sum, back_count) = per_season
            .get(&(season, j, i))
            .expect("match records come in mirrored pairs");
        let s_j = back_sum / back_count as f64;
        let slot = diffs[w].entry((i, j)).or_insert((0.0, 0));
        slot.0 += s_i - s_j;
        slot.1 += 1;
    }

    let mut edges = Vec::with_capacity(windows);
    let mut values = Vec::with_capacity(windows);
    for (w, window_diffs) in diffs.iter().enumerate() {
        if !any_record[w] {
            return Err(Error::Precondition(format!(
                "window {w} contains no records"
            )));
        }
        edges.push(window_diffs.keys().copied().collect::<Vec<_>>());
        values.push(
            window_diffs
                .values()
                .map(|&(sum, count)| sum / count as f64)
                .collect(),
        );
    }
    ObservationSet::new(GraphSequence::new(n_items, edges)?, values)
}

/// Per-window connectivity flags of an already-built observation set,
/// plus union connectivity; used to annotate match ingestion where
/// individual windows are typically disconnected.
pub fn connectivity_summary(obs: &ObservationSet) -> (Vec<bool>, bool) {
    let g = obs.graph();
    let per_step = (0..g.step_count()).map(|k| g.is_connected(k)).collect();
    (per_step, g.union_is_connected())
}

/// Union-graph connectivity over an arbitrary record subset, before any
/// windowing; handy for early validation.
pub fn records_union_connected(records: &[ScoreRecord], n_items: usize) -> bool {
    let mut uf = UnionFind::new(n_items);
    let mut per_unit: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for rec in records {
        if let Some(cp) = rec.counterpart {
            uf.union(rec.item, cp);
        } else {
            per_unit.entry(rec.time_unit).or_default().push(rec.item);
        }
    }
    for items in per_unit.values() {
        for pair in items.windows(2) {
            uf.union(pair[0], pair[1]);
        }
    }
    uf.component_count() == 1
}
