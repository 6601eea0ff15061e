//! Flat-file formats for run artifacts. Floats are written with Rust's
//! shortest round-trip formatting, so a read-write cycle is lossless and
//! identical inputs give byte-identical files.

use std::io::Write;

use crate::diagnostics::{ConvergenceRow, PitEntry, PitTable};
use crate::error::{Error, Result};
use crate::mcmc::PosteriorSample;
use crate::model::ParameterDraw;
use crate::optimize::{class_sum, Lineup, Solution};
use crate::predictive::{MatchScenario, PredictiveSample};
use crate::roster::Roster;
use crate::scalar::Real;
use crate::boxscore::Metric;

fn parse_field<V: std::str::FromStr>(field: &str, row: usize, column: &str) -> Result<V> {
    field.trim().parse().map_err(|_| Error::Row {
        row,
        message: format!("cannot parse `{field}` in column `{column}`"),
    })
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

fn parse_opt(field: &str, row: usize, column: &str) -> Result<Option<f64>> {
    if field.eq_ignore_ascii_case("NA") || field.is_empty() {
        Ok(None)
    } else {
        parse_field(field, row, column).map(Some)
    }
}

/// `draws.csv`: `chain,iteration` then one column per scalar parameter.
pub fn write_draws<T: Real, W: Write>(out: W, sample: &PosteriorSample<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(ParameterDraw::<T>::column_names(sample.player_count(), sample.match_count()));
    w.write_record(&header)?;
    for ((d, c), t) in sample.draws().iter().zip(sample.chain_ids()).zip(sample.iterations()) {
        let mut rec = vec![c.to_string(), t.to_string()];
        rec.extend(d.to_flat().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("draws.csv", e))?;
    Ok(())
}

pub fn read_draws<T: Real>(text: &str, players: usize, matches: usize, panel_fingerprint: &str) -> Result<PosteriorSample<T>> {
    let mut r = reader(text);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut expected = vec!["chain".to_string(), "iteration".to_string()];
    expected.extend(ParameterDraw::<T>::column_names(players, matches));
    if let Some(missing) = expected.iter().find(|c| !header.contains(c)) {
        return Err(Error::MissingColumn(missing.clone()));
    }
    if header != expected {
        return Err(Error::Validation("draws.csv columns are not in canonical order".into()));
    }
    let (mut draws, mut chains, mut iterations) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        chains.push(parse_field(&rec[0], row, "chain")?);
        iterations.push(parse_field(&rec[1], row, "iteration")?);
        let flat = (2..rec.len())
            .map(|c| parse_field::<T>(&rec[c], row, &header[c]))
            .collect::<Result<Vec<T>>>()?;
        draws.push(ParameterDraw::from_flat(&flat, players, matches)?);
    }
    PosteriorSample::new(draws, chains, iterations, panel_fingerprint.to_string())
}

/// `predictive.csv`: `draw` then one column per player, headed by name.
pub fn write_predictive<T: Real, W: Write>(out: W, pred: &PredictiveSample<T>, roster: &Roster) -> Result<()> {
    if pred.players() != roster.len() {
        return Err(Error::Validation("predictive sample does not match roster".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["draw".to_string()];
    header.extend(roster.entries().iter().map(|e| e.name.clone()));
    w.write_record(&header)?;
    for (s, row) in pred.rows().enumerate() {
        let mut rec = vec![s.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("predictive.csv", e))?;
    Ok(())
}

pub fn read_predictive<T: Real>(
    text: &str,
    roster: &Roster,
    metric: Metric,
    scenario: MatchScenario,
    source_fingerprint: &str,
) -> Result<PredictiveSample<T>> {
    let mut r = reader(text);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    for e in roster.entries() {
        if !header.contains(&e.name) {
            return Err(Error::MissingColumn(e.name.clone()));
        }
    }
    let columns: Vec<usize> = roster
        .entries()
        .iter()
        .map(|e| header.iter().position(|h| *h == e.name).expect("checked"))
        .collect();
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = columns
            .iter()
            .map(|&c| parse_field::<T>(&rec[c], k + 2, &header[c]))
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    PredictiveSample::from_rows(rows, metric, scenario, source_fingerprint.to_string())
}

/// `solutions.csv`: draw, members, objective, female count and class sum.
pub fn write_solutions<W: Write>(out: W, solutions: &[Solution], roster: &Roster) -> Result<()> {
    let team = solutions.first().map_or(0, |s| s.lineup.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["draw".to_string()];
    header.extend((1..=team).map(|k| format!("member_{k}")));
    header.extend(["objective", "female_count", "class_sum"].map(String::from));
    w.write_record(&header)?;
    for s in solutions {
        let mut rec = vec![s.draw.to_string()];
        rec.extend(s.lineup.members().iter().map(|m| m.to_string()));
        rec.push(s.objective.to_string());
        rec.push(s.lineup.female_count(roster).to_string());
        rec.push(class_sum(&s.lineup, roster).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("solutions.csv", e))?;
    Ok(())
}

pub fn read_solutions(text: &str) -> Result<Vec<Solution>> {
    let mut r = reader(text);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let draw = col("draw")?;
    let objective = col("objective")?;
    let members: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("member_"))
        .map(|(k, _)| k)
        .collect();
    if members.is_empty() {
        return Err(Error::MissingColumn("member_1".into()));
    }
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let lineup = Lineup::new(
            members
                .iter()
                .map(|&c| parse_field::<usize>(&rec[c], row, &header[c]))
                .collect::<Result<Vec<_>>>()?,
        )?;
        out.push(Solution {
            draw: parse_field(&rec[draw], row, "draw")?,
            lineup,
            objective: parse_field(&rec[objective], row, "objective")?,
        });
    }
    Ok(out)
}

/// `pit.csv`: player, match, pit, ess (degenerate entries have pit `NA`).
pub fn write_pit<W: Write>(out: W, table: &PitTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["player", "match", "pit", "ess", "flagged"])?;
    for e in &table.entries {
        w.write_record([
            e.player.to_string(),
            e.match_index.to_string(),
            opt(e.pit),
            e.ess.to_string(),
            (e.flagged as u8).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("pit.csv", e))?;
    Ok(())
}

pub fn read_pit(text: &str, draws: usize) -> Result<PitTable> {
    let mut r = reader(text);
    let mut entries = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        if rec.len() < 4 {
            return Err(Error::Row { row, message: "expected player,match,pit,ess".into() });
        }
        entries.push(PitEntry {
            player: parse_field(&rec[0], row, "player")?,
            match_index: parse_field(&rec[1], row, "match")?,
            pit: parse_opt(&rec[2], row, "pit")?,
            ess: parse_field(&rec[3], row, "ess")?,
            flagged: rec.get(4).is_some_and(|f| f == "1"),
        });
    }
    Ok(PitTable { draws, entries })
}

/// `convergence.csv`: parameter, rhat, ess (`NA` when undefined).
pub fn write_convergence<W: Write>(out: W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "rhat", "ess", "zero_variance"])?;
    for r in rows {
        w.write_record([r.parameter.clone(), opt(r.rhat), opt(r.ess), (r.zero_variance as u8).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("convergence.csv", e))?;
    Ok(())
}

pub fn read_convergence(text: &str) -> Result<Vec<ConvergenceRow>> {
    let mut r = reader(text);
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        out.push(ConvergenceRow {
            parameter: rec[0].to_string(),
            rhat: parse_opt(&rec[1], row, "rhat")?,
            ess: parse_opt(&rec[2], row, "ess")?,
            zero_variance: rec.get(3).is_some_and(|f| f == "1"),
        });
    }
    Ok(out)
}

/// Writes a roster in the input format, so a run directory is self-contained.
pub fn write_roster<W: Write>(out: W, roster: &Roster) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "name", "classification", "sex"])?;
    for e in roster.entries() {
        w.write_record([
            e.index.to_string(),
            e.name.clone(),
            e.classification.to_string(),
            if e.is_female { "F" } else { "M" }.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("roster.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{run_sampler, SamplerConfig};
    use crate::optimize::{solve_posterior, Engine, RuleSet, SelectionConstraints};
    use crate::panel::{Observation, Panel};
    use crate::predictive::predict_match;
    use crate::roster::{doneck_dolphins_2022, parse_roster};
    use crate::diagnostics::{convergence_table, cross_validated_pit};

    fn panel() -> Panel<f64> {
        let obs = (1..=9)
            .flat_map(|i| {
                (1..=3).map(move |j| Observation {
                    player: i,
                    match_index: j,
                    value: ((i * 7 + j * 3) % 11) as f64 / 10.0 - 0.4,
                    home: j == 2,
                })
            })
            .collect();
        Panel::new(doneck_dolphins_2022(), obs, Metric::Pir, 3).unwrap()
    }

    fn sample(p: &Panel<f64>) -> PosteriorSample<f64> {
        let cfg = SamplerConfig {
            chains: 2,
            burn_in: 50,
            iterations: 40,
            thin: 2,
            ..SamplerConfig::desk(8)
        };
        run_sampler(p, &cfg).unwrap()
    }

    #[test]
    fn draws_round_trip_exactly() {
        let p = panel();
        let s = sample(&p);
        let mut buf = Vec::new();
        write_draws(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("chain,iteration,beta0,beta_w,beta_c,beta_h,beta1,sigma,"));
        assert!(text.lines().next().unwrap().ends_with("b0m[3]"));
        let back = read_draws::<f64>(&text, 9, 3, &p.fingerprint()).unwrap();
        assert_eq!(back, s);
        let mut again = Vec::new();
        write_draws(&mut again, &back).unwrap();
        assert_eq!(buf, again);
        assert!(matches!(read_draws::<f64>(&text, 9, 4, "x"), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn predictive_and_solutions_round_trip() {
        let p = panel();
        let s = sample(&p);
        let pred = predict_match(&s, &p, MatchScenario::default(), 4).unwrap();
        let mut buf = Vec::new();
        write_predictive(&mut buf, &pred, p.roster()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("draw,Annabel Breuer,Correy Rossi,"));
        let back = read_predictive::<f64>(&text, p.roster(), Metric::Pir, pred.scenario(), pred.source_fingerprint()).unwrap();
        assert_eq!(back, pred);

        let sols = solve_posterior(&pred, p.roster(), &RuleSet::rbbl(), &SelectionConstraints::default(), Engine::BranchAndBound).unwrap();
        let mut buf = Vec::new();
        write_solutions(&mut buf, &sols, p.roster()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("draw,member_1,member_2,member_3,member_4,member_5,objective,female_count,class_sum\n"));
        assert_eq!(read_solutions(&text).unwrap(), sols);
    }

    #[test]
    fn diagnostics_round_trip() {
        let p = panel();
        let s = sample(&p);
        let pit = cross_validated_pit(&s, &p).unwrap();
        let mut buf = Vec::new();
        write_pit(&mut buf, &pit).unwrap();
        let back = read_pit(std::str::from_utf8(&buf).unwrap(), pit.draws).unwrap();
        assert_eq!(back, pit);

        let conv = convergence_table(&s);
        let mut buf = Vec::new();
        write_convergence(&mut buf, &conv).unwrap();
        assert_eq!(read_convergence(std::str::from_utf8(&buf).unwrap()).unwrap(), conv);
    }

    #[test]
    fn roster_round_trip() {
        let r = doneck_dolphins_2022();
        let mut buf = Vec::new();
        write_roster(&mut buf, &r).unwrap();
        assert_eq!(parse_roster(std::str::from_utf8(&buf).unwrap()).unwrap(), r);
    }
}
