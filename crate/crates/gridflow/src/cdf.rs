//! IEEE Common Data Format reader and writer.
//!
//! The CDF is the 1973 fixed-column exchange text widely used for the
//! classic test systems (a title card, a bus section and a branch section,
//! each terminated by a `-999` card). [`parse_cdf`] reads it into a
//! [`NetworkModel`] at the loadflow layer plus a passthrough record of the
//! fields the model does not represent; [`write_cdf`] reassembles the text,
//! so `parse → write → parse` reproduces the document exactly.
//!
//! Conventions on the model side:
//!
//! * Bus numbers become string ids (`"14"`); names, areas and shunts carry
//!   over directly. MW/MVAR columns are converted to per unit on the title
//!   card's MVA base, angles from degrees to radians.
//! * Bus types 0 and 1 map to PQ, 2 to PV, 3 to the slack. For PV and
//!   slack buses the max/min MVAR columns become the bus reactive limits
//!   (left `None` when both are zero); for type 0/1 buses those columns
//!   hold voltage limits, which pass through unmodeled.
//! * A branch is a transformer when its type column is nonzero, its tap
//!   column is positive, or its phase-shift column is nonzero — the classic
//!   files mark transformers only by a nonzero tap. Rating 1 becomes the
//!   branch rating (pu); ratings 2 and 3 pass through.
//! * The CDF has no out-of-service flag: everything parses as in service,
//!   and equipment switched off in the model is still written out.
//!
//! Writing a model whose bus ids are not all integers renumbers the buses
//! 1..n in declaration order, since the format requires numeric bus fields.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    build_network, BranchKind, BranchSpec, BusKind, BusSpec, Layer, NetworkModel, NetworkSpec,
};

/// Title-card fields (all trimmed).
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTitle {
    pub date: String,
    pub originator: String,
    pub mva_base: f64,
    pub year: String,
    pub season: String,
    pub case_id: String,
}

/// Bus-card fields that the network model does not represent, kept so the
/// writer can reproduce the source document.
#[derive(Debug, Clone, PartialEq)]
pub struct BusExtra {
    pub loss_zone: u32,
    /// Raw type column; preserves the 0-vs-1 distinction inside PQ.
    pub type_raw: u8,
    pub desired_v: f64,
    /// Voltage limit columns of type 0/1 buses (MVAR limits of PV buses
    /// live on the bus itself).
    pub volt_max: f64,
    pub volt_min: f64,
    pub remote_bus: u32,
}

impl Default for BusExtra {
    fn default() -> Self {
        BusExtra {
            loss_zone: 1,
            type_raw: 0,
            desired_v: 0.0,
            volt_max: 0.0,
            volt_min: 0.0,
            remote_bus: 0,
        }
    }
}

/// Branch-card fields that the network model does not represent.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchExtra {
    pub area: u32,
    pub loss_zone: u32,
    pub circuit: u32,
    pub type_raw: u8,
    pub rating2_mva: f64,
    pub rating3_mva: f64,
    pub control_bus: u32,
    pub side: u8,
}

impl Default for BranchExtra {
    fn default() -> Self {
        BranchExtra {
            area: 1,
            loss_zone: 1,
            circuit: 1,
            type_raw: 0,
            rating2_mva: 0.0,
            rating3_mva: 0.0,
            control_bus: 0,
            side: 0,
        }
    }
}

/// A parsed CDF file: the network model plus everything needed to write the
/// same text back out.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfDocument {
    pub title: CdfTitle,
    pub network: NetworkModel,
    /// Parallel to `network.buses`.
    pub bus_extras: Vec<BusExtra>,
    /// Parallel to `network.branches`.
    pub branch_extras: Vec<BranchExtra>,
    /// Lines after the branch terminator (loss zones, interchange, tie
    /// lines, `END OF DATA`), preserved verbatim.
    pub trailing: Vec<String>,
}

impl CdfDocument {
    /// Wrap an existing model for export with neutral title and passthrough
    /// fields. PV and slack buses get their scheduled voltage as the
    /// desired-volts column.
    pub fn from_network(network: NetworkModel) -> CdfDocument {
        let bus_extras = network
            .buses
            .iter()
            .map(|b| BusExtra {
                desired_v: match b.kind {
                    BusKind::PV | BusKind::Slack => b.v_mag,
                    _ => 0.0,
                },
                ..BusExtra::default()
            })
            .collect();
        let branch_extras = vec![BranchExtra::default(); network.branches.len()];
        CdfDocument {
            title: CdfTitle {
                date: "01/01/90".to_string(),
                originator: "GRIDFLOW".to_string(),
                mva_base: network.base_mva,
                year: "1990".to_string(),
                season: "W".to_string(),
                case_id: network.id.to_uppercase(),
            },
            network,
            bus_extras,
            branch_extras,
            trailing: vec!["END OF DATA".to_string()],
        }
    }
}

/// One fixed-column card with its 1-based line number for error messages.
struct Card<'a> {
    text: &'a str,
    line_no: usize,
}

impl<'a> Card<'a> {
    /// 1-indexed inclusive column span, clamped to the line length.
    fn span(&self, a: usize, b: usize) -> &'a str {
        let len = self.text.len();
        let start = (a - 1).min(len);
        let end = b.min(len);
        &self.text[start..end]
    }

    fn f64_at(&self, a: usize, b: usize) -> Result<f64> {
        let raw = self.span(a, b).trim();
        if raw.is_empty() {
            return Ok(0.0);
        }
        raw.parse().map_err(|_| {
            Error::parse(
                format!("line {}, cols {a}-{b}", self.line_no),
                format!("{raw:?} is not a number"),
            )
        })
    }

    fn int_at(&self, a: usize, b: usize) -> Result<i64> {
        let raw = self.span(a, b).trim();
        if raw.is_empty() {
            return Ok(0);
        }
        raw.parse().map_err(|_| {
            Error::parse(
                format!("line {}, cols {a}-{b}", self.line_no),
                format!("{raw:?} is not an integer"),
            )
        })
    }
}

fn parse_bus_card(card: &Card) -> Result<(BusSpec, BusExtra, f64, f64)> {
    let number = card.int_at(1, 4)?;
    if number <= 0 {
        return Err(Error::parse(
            format!("line {}, cols 1-4", card.line_no),
            format!("bus number must be positive, got {number}"),
        ));
    }
    let type_raw = card.int_at(25, 26)?;
    let kind = match type_raw {
        0 | 1 => BusKind::PQ,
        2 => BusKind::PV,
        3 => BusKind::Slack,
        other => {
            return Err(Error::parse(
                format!("line {}, cols 25-26", card.line_no),
                format!("unsupported bus type {other} (expected 0-3)"),
            ))
        }
    };
    let max_col = card.f64_at(91, 98)?;
    let min_col = card.f64_at(99, 106)?;
    let spec = BusSpec {
        id: number.to_string(),
        name: card.span(6, 17).trim().to_string(),
        base_kv: card.f64_at(77, 83)?,
        kind,
        v_mag: card.f64_at(28, 33)?,
        v_ang: card.f64_at(34, 40)?.to_radians(),
        load_p: card.f64_at(41, 49)?,
        load_q: card.f64_at(50, 59)?,
        gen_p: card.f64_at(60, 67)?,
        gen_q: card.f64_at(68, 75)?,
        shunt_g: card.f64_at(107, 114)?,
        shunt_b: card.f64_at(115, 122)?,
        area: card.int_at(19, 20)? as i32,
        in_service: true,
        q_min: None,
        q_max: None,
    };
    let extra = BusExtra {
        loss_zone: card.int_at(21, 23)? as u32,
        type_raw: type_raw as u8,
        desired_v: card.f64_at(85, 90)?,
        volt_max: if matches!(kind, BusKind::PQ) { max_col } else { 0.0 },
        volt_min: if matches!(kind, BusKind::PQ) { min_col } else { 0.0 },
        remote_bus: card.int_at(123, 127)? as u32,
    };
    // For PV and slack buses the max/min columns are MVAR limits.
    let (q_max_mvar, q_min_mvar) = if matches!(kind, BusKind::PV | BusKind::Slack) {
        (max_col, min_col)
    } else {
        (0.0, 0.0)
    };
    Ok((spec, extra, q_max_mvar, q_min_mvar))
}

fn parse_branch_card(card: &Card) -> Result<(BranchSpec, BranchExtra, f64)> {
    let from = card.int_at(1, 4)?;
    let to = card.int_at(6, 9)?;
    let type_raw = card.int_at(19, 19)?;
    let tap_col = card.f64_at(77, 82)?;
    let shift_deg = card.f64_at(84, 90)?;
    let kind = if type_raw != 0 || tap_col > 0.0 || shift_deg != 0.0 {
        BranchKind::Transformer
    } else {
        BranchKind::Line
    };
    let spec = BranchSpec {
        id: String::new(), // assigned from endpoints by the network builder
        from_bus: from.to_string(),
        to_bus: to.to_string(),
        kind,
        r: card.f64_at(20, 29)?,
        x: card.f64_at(30, 40)?,
        b_total: card.f64_at(41, 50)?,
        tap: if tap_col > 0.0 { tap_col } else { 1.0 },
        phase_shift: shift_deg.to_radians(),
        rating: 0.0, // filled in pu by the caller
        in_service: true,
    };
    let extra = BranchExtra {
        area: card.int_at(11, 12)? as u32,
        loss_zone: card.int_at(13, 15)? as u32,
        circuit: card.int_at(17, 17)?.max(1) as u32,
        type_raw: type_raw as u8,
        rating2_mva: card.f64_at(57, 61)?,
        rating3_mva: card.f64_at(63, 67)?,
        control_bus: card.int_at(69, 72)? as u32,
        side: card.int_at(74, 74)? as u8,
    };
    let rating1_mva = card.f64_at(51, 55)?;
    Ok((spec, extra, rating1_mva))
}

/// Parse CDF text into a document. The model lands at the loadflow layer
/// with the file's solved voltages in place.
pub fn parse_cdf(text: &str) -> Result<CdfDocument> {
    if !text.is_ascii() {
        return Err(Error::parse("file", "CDF text must be ASCII"));
    }
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, title_line) = lines
        .next()
        .ok_or_else(|| Error::parse("line 1", "empty file: expected a title card"))?;
    let title_card = Card {
        text: title_line,
        line_no: 1,
    };
    let mva_base = {
        let v = title_card.f64_at(32, 37)?;
        if v > 0.0 {
            v
        } else {
            100.0
        }
    };
    let title = CdfTitle {
        date: title_card.span(2, 9).trim().to_string(),
        originator: title_card.span(11, 30).trim().to_string(),
        mva_base,
        year: title_card.span(39, 42).trim().to_string(),
        season: title_card.span(44, 44).trim().to_string(),
        case_id: title_card.span(46, 73).trim().to_string(),
    };

    match lines.next() {
        Some((_, l)) if l.to_ascii_uppercase().contains("BUS DATA") => {}
        Some((n, l)) => {
            return Err(Error::parse(
                format!("line {n}"),
                format!("expected the BUS DATA header, got {:?}", l.trim()),
            ))
        }
        None => return Err(Error::parse("line 2", "file ends before the bus section")),
    }

    let mut buses = Vec::new();
    let mut bus_extras = Vec::new();
    let mut q_limits_mvar = Vec::new();
    let mut terminated = false;
    for (line_no, line) in lines.by_ref() {
        if line.trim_start().starts_with("-999") {
            terminated = true;
            break;
        }
        let (spec, extra, q_max, q_min) = parse_bus_card(&Card { text: line, line_no })?;
        buses.push(spec);
        bus_extras.push(extra);
        q_limits_mvar.push((q_max, q_min));
    }
    if !terminated {
        return Err(Error::parse(
            "end of file",
            "bus section never terminated with -999",
        ));
    }

    match lines.next() {
        Some((_, l)) if l.to_ascii_uppercase().contains("BRANCH DATA") => {}
        Some((n, l)) => {
            return Err(Error::parse(
                format!("line {n}"),
                format!("expected the BRANCH DATA header, got {:?}", l.trim()),
            ))
        }
        None => {
            return Err(Error::parse(
                "end of file",
                "file ends before the branch section",
            ))
        }
    }

    let mut branches = Vec::new();
    let mut branch_extras = Vec::new();
    let mut ratings_mva = Vec::new();
    terminated = false;
    for (line_no, line) in lines.by_ref() {
        if line.trim_start().starts_with("-999") {
            terminated = true;
            break;
        }
        let (spec, extra, rating1) = parse_branch_card(&Card { text: line, line_no })?;
        branches.push(spec);
        branch_extras.push(extra);
        ratings_mva.push(rating1);
    }
    if !terminated {
        return Err(Error::parse(
            "end of file",
            "branch section never terminated with -999",
        ));
    }

    let trailing = lines.map(|(_, l)| l.to_string()).collect();

    // Convert MW/MVAR columns to per unit on the system base.
    for bus in &mut buses {
        bus.load_p /= mva_base;
        bus.load_q /= mva_base;
        bus.gen_p /= mva_base;
        bus.gen_q /= mva_base;
    }
    for (bus, (q_max, q_min)) in buses.iter_mut().zip(&q_limits_mvar) {
        if *q_max != 0.0 || *q_min != 0.0 {
            bus.q_max = Some(q_max / mva_base);
            bus.q_min = Some(q_min / mva_base);
        }
    }
    for (branch, mva) in branches.iter_mut().zip(&ratings_mva) {
        branch.rating = mva / mva_base;
    }

    let case_id = if title.case_id.is_empty() {
        "cdf-case".to_string()
    } else {
        title.case_id.clone()
    };
    let network = build_network(&NetworkSpec {
        id: case_id,
        base_mva: mva_base,
        frequency: 60.0,
        buses,
        branches,
        children: Vec::new(),
    })?
    .extend_layer(Layer::AcLoadflow)?;

    Ok(CdfDocument {
        title,
        network,
        bus_extras,
        branch_extras,
        trailing,
    })
}

/// Read and parse a CDF file.
pub fn read_cdf(path: &Path) -> Result<CdfDocument> {
    parse_cdf(&std::fs::read_to_string(path)?)
}

/// Place `s` into the 1-indexed inclusive span `[a, b]`, right-justified
/// unless `left`.
fn put(line: &mut Vec<u8>, a: usize, b: usize, s: &str, left: bool) {
    if line.len() < b {
        line.resize(b, b' ');
    }
    let width = b - a + 1;
    let s = if s.len() > width { &s[..width] } else { s };
    let pad = width - s.len();
    let start = if left { a - 1 } else { a - 1 + pad };
    line[start..start + s.len()].copy_from_slice(s.as_bytes());
}

/// Format with the most decimals that fit the span, erroring if even the
/// integer part overflows.
fn fmt_num(v: f64, a: usize, b: usize, max_dec: usize) -> Result<String> {
    let width = b - a + 1;
    let mut dec = max_dec;
    loop {
        let s = format!("{v:.dec$}");
        if s.len() <= width {
            return Ok(s);
        }
        if dec == 0 {
            return Err(Error::model(format!(
                "value {v} does not fit in CDF columns {a}-{b}"
            )));
        }
        dec -= 1;
    }
}

fn put_num(line: &mut Vec<u8>, a: usize, b: usize, v: f64, max_dec: usize) -> Result<()> {
    let s = fmt_num(v, a, b, max_dec)?;
    put(line, a, b, &s, false);
    Ok(())
}

fn finish(line: Vec<u8>) -> String {
    let mut s = String::from_utf8(line).expect("card bytes are ASCII");
    while s.ends_with(' ') {
        s.pop();
    }
    s
}

/// Render the document back to CDF text. Bus numbering reuses the model's
/// ids when they are all integers; otherwise buses are renumbered 1..n in
/// declaration order.
pub fn write_cdf(doc: &CdfDocument) -> Result<String> {
    let net = &doc.network;
    let base = doc.title.mva_base;
    if base <= 0.0 {
        return Err(Error::model("CDF title MVA base must be positive"));
    }

    let numeric: Option<Vec<u32>> = net
        .buses
        .iter()
        .map(|b| b.id.parse::<u32>().ok().filter(|n| *n > 0))
        .collect();
    let numbers: Vec<u32> = match numeric {
        Some(nums) => nums,
        None => (1..=net.buses.len() as u32).collect(),
    };
    let number_of = |bus_id: &str| -> u32 {
        let pos = net
            .buses
            .iter()
            .position(|b| b.id == bus_id)
            .expect("validated branch endpoint");
        numbers[pos]
    };

    let mut out = String::new();
    {
        let mut line = Vec::new();
        put(&mut line, 2, 9, &doc.title.date, false);
        put(&mut line, 11, 30, &doc.title.originator, true);
        put_num(&mut line, 32, 37, base, 1)?;
        put(&mut line, 39, 42, &doc.title.year, false);
        put(&mut line, 44, 44, &doc.title.season, false);
        put(&mut line, 46, 73, &doc.title.case_id, true);
        out.push_str(&finish(line));
        out.push('\n');
    }

    out.push_str(&format!(
        "BUS DATA FOLLOWS {:>28} ITEMS\n",
        net.buses.len()
    ));
    let default_bus_extra = BusExtra::default();
    for (pos, bus) in net.buses.iter().enumerate() {
        let extra = doc.bus_extras.get(pos).unwrap_or(&default_bus_extra);
        let type_col = match bus.kind {
            BusKind::Slack => 3,
            BusKind::PV => 2,
            BusKind::PQ | BusKind::Isolated => {
                if extra.type_raw <= 1 {
                    extra.type_raw
                } else {
                    0
                }
            }
        };
        let (max_col, min_col) = match bus.kind {
            BusKind::PV | BusKind::Slack => (
                bus.q_max.map_or(0.0, |q| q * base),
                bus.q_min.map_or(0.0, |q| q * base),
            ),
            _ => (extra.volt_max, extra.volt_min),
        };
        let mut line = Vec::new();
        put(&mut line, 1, 4, &numbers[pos].to_string(), false);
        put(&mut line, 6, 17, &bus.name, true);
        put(&mut line, 19, 20, &bus.area.to_string(), false);
        put(&mut line, 21, 23, &extra.loss_zone.to_string(), false);
        put(&mut line, 25, 26, &type_col.to_string(), false);
        put_num(&mut line, 28, 33, bus.v_mag, 4)?;
        put_num(&mut line, 34, 40, bus.v_ang.to_degrees(), 2)?;
        put_num(&mut line, 41, 49, bus.load_p * base, 2)?;
        put_num(&mut line, 50, 59, bus.load_q * base, 2)?;
        put_num(&mut line, 60, 67, bus.gen_p * base, 2)?;
        put_num(&mut line, 68, 75, bus.gen_q * base, 2)?;
        put_num(&mut line, 77, 83, bus.base_kv, 1)?;
        put_num(&mut line, 85, 90, extra.desired_v, 4)?;
        put_num(&mut line, 91, 98, max_col, 2)?;
        put_num(&mut line, 99, 106, min_col, 2)?;
        put_num(&mut line, 107, 114, bus.shunt_g, 4)?;
        put_num(&mut line, 115, 122, bus.shunt_b, 4)?;
        put(&mut line, 123, 127, &extra.remote_bus.to_string(), false);
        out.push_str(&finish(line));
        out.push('\n');
    }
    out.push_str("-999\n");

    out.push_str(&format!(
        "BRANCH DATA FOLLOWS {:>25} ITEMS\n",
        net.branches.len()
    ));
    let default_branch_extra = BranchExtra::default();
    for (pos, branch) in net.branches.iter().enumerate() {
        let extra = doc.branch_extras.get(pos).unwrap_or(&default_branch_extra);
        let tap_col = match branch.kind {
            BranchKind::Line => 0.0,
            BranchKind::Transformer => branch.tap,
        };
        let mut line = Vec::new();
        put(&mut line, 1, 4, &number_of(&branch.from_bus).to_string(), false);
        put(&mut line, 6, 9, &number_of(&branch.to_bus).to_string(), false);
        put(&mut line, 11, 12, &extra.area.to_string(), false);
        put(&mut line, 13, 15, &extra.loss_zone.to_string(), false);
        put(&mut line, 17, 17, &extra.circuit.to_string(), false);
        put(&mut line, 19, 19, &extra.type_raw.to_string(), false);
        put_num(&mut line, 20, 29, branch.r, 5)?;
        put_num(&mut line, 30, 40, branch.x, 5)?;
        put_num(&mut line, 41, 50, branch.b_total, 5)?;
        put_num(&mut line, 51, 55, branch.rating * base, 0)?;
        put_num(&mut line, 57, 61, extra.rating2_mva, 0)?;
        put_num(&mut line, 63, 67, extra.rating3_mva, 0)?;
        put(&mut line, 69, 72, &extra.control_bus.to_string(), false);
        put(&mut line, 74, 74, &extra.side.to_string(), false);
        put_num(&mut line, 77, 82, tap_col, 3)?;
        put_num(&mut line, 84, 90, branch.phase_shift.to_degrees(), 2)?;
        out.push_str(&finish(line));
        out.push('\n');
    }
    out.push_str("-999\n");

    for line in &doc.trailing {
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

/// Write the document to a file.
pub fn write_cdf_file(doc: &CdfDocument, path: &Path) -> Result<()> {
    std::fs::write(path, write_cdf(doc)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Z_MIN;

    fn fixture(name: &str) -> String {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("data")
            .join(name);
        std::fs::read_to_string(path).unwrap()
    }

    #[test]
    fn parses_the_14_bus_fixture() {
        let doc = parse_cdf(&fixture("ieee14.cdf")).unwrap();
        let net = &doc.network;
        assert_eq!(net.buses.len(), 14);
        assert_eq!(net.branches.len(), 20);
        assert_eq!(net.base_mva, 100.0);
        assert_eq!(net.layer, Layer::AcLoadflow);
        assert_eq!(doc.title.case_id, "IEEE 14 BUS TEST CASE");

        let slack = net.bus("1").unwrap();
        assert_eq!(slack.kind, BusKind::Slack);
        assert_eq!(slack.v_mag, 1.06);
        assert_eq!(slack.v_ang, 0.0);
        assert_eq!(slack.name, "Bus 1     HV");

        let b2 = net.bus("2").unwrap();
        assert_eq!(b2.kind, BusKind::PV);
        assert_eq!(b2.q_max, Some(0.5));
        assert_eq!(b2.q_min, Some(-0.4));
        assert!((b2.load_p - 0.217).abs() < 1e-12);
        assert!((b2.gen_p - 0.40).abs() < 1e-12);

        let b4 = net.bus("4").unwrap();
        assert!((b4.load_q - (-0.039)).abs() < 1e-12, "negative MVAR load");
        assert!((b4.v_ang - (-10.33_f64).to_radians()).abs() < 1e-12);

        let b9 = net.bus("9").unwrap();
        assert_eq!(b9.shunt_b, 0.19);
        assert_eq!(b9.q_max, None);

        let t47 = net.branch("4-7").unwrap();
        assert_eq!(t47.kind, BranchKind::Transformer);
        assert_eq!(t47.tap, 0.978);
        assert_eq!(t47.r, 0.0);
        assert!((t47.x - 0.20912).abs() < 1e-12);

        let l1314 = net.branch("13-14").unwrap();
        assert_eq!(l1314.kind, BranchKind::Line);
        assert_eq!(l1314.tap, 1.0);
        assert!((l1314.x - 0.34802).abs() < 1e-12);
        assert!((net.branch("1-2").unwrap().b_total - 0.0528).abs() < 1e-12);
    }

    #[test]
    fn parses_the_30_bus_fixture() {
        let doc = parse_cdf(&fixture("ieee30.cdf")).unwrap();
        let net = &doc.network;
        assert_eq!(net.buses.len(), 30);
        assert_eq!(net.branches.len(), 41);
        for (id, tap) in [("6-9", 0.978), ("6-10", 0.969), ("4-12", 0.932), ("28-27", 0.968)] {
            let t = net.branch(id).unwrap();
            assert_eq!(t.kind, BranchKind::Transformer, "{id}");
            assert_eq!(t.tap, tap, "{id}");
        }
        assert_eq!(net.bus("10").unwrap().shunt_b, 0.19);
        assert_eq!(net.bus("24").unwrap().shunt_b, 0.043);
        let pv: Vec<&str> = net
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::PV)
            .map(|b| b.id.as_str())
            .collect();
        assert_eq!(pv, ["2", "5", "8", "11", "13"]);
        assert_eq!(net.bus("1").unwrap().base_kv, 132.0);
    }

    #[test]
    fn parse_write_parse_is_a_fixpoint_on_both_fixtures() {
        for name in ["ieee14.cdf", "ieee30.cdf"] {
            let first = parse_cdf(&fixture(name)).unwrap();
            let text1 = write_cdf(&first).unwrap();
            let second = parse_cdf(&text1).unwrap();
            assert_eq!(first, second, "{name}: reparse changed the document");
            let text2 = write_cdf(&second).unwrap();
            assert_eq!(text1, text2, "{name}: rewrite changed the text");
        }
    }

    #[test]
    fn parallel_circuits_get_distinct_ids() {
        let text = "\
 01/01/90 TEST                  100.0 1990 W PARALLEL PAIR
BUS DATA FOLLOWS                            2 ITEMS
   1 A             1  1  3 1.0000   0.00     0.00      0.00    0.00    0.00     0.0 1.0000    0.00    0.00  0.0000  0.0000    0
   2 B             1  1  0 1.0000   0.00    10.00      0.00    0.00    0.00     0.0 0.0000    0.00    0.00  0.0000  0.0000    0
-999
BRANCH DATA FOLLOWS                         2 ITEMS
   1    2  1  1 1 0   0.01000    0.10000   0.00000    0     0     0    0 0   0.000    0.00
   1    2  1  1 2 0   0.01000    0.12000   0.00000    0     0     0    0 0   0.000    0.00
-999
END OF DATA
";
        let doc = parse_cdf(text).unwrap();
        assert_eq!(doc.network.branches[0].id, "1-2");
        assert_eq!(doc.network.branches[1].id, "1-2#2");
        assert_eq!(doc.branch_extras[1].circuit, 2);
        let text1 = write_cdf(&doc).unwrap();
        assert_eq!(parse_cdf(&text1).unwrap(), doc);
    }

    #[test]
    fn bad_voltage_field_reports_line_and_columns() {
        let text = fixture("ieee14.cdf").replace("1.0450  -4.98", "1.04xy  -4.98");
        let err = parse_cdf(&text).unwrap_err();
        match err {
            Error::Parse { path, message } => {
                assert_eq!(path, "line 4, cols 28-33");
                assert!(message.contains("1.04xy"), "{message}");
            }
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn missing_terminator_is_reported() {
        let full = fixture("ieee14.cdf");
        let truncated: Vec<&str> = full.lines().take_while(|l| !l.starts_with("-999")).collect();
        let err = parse_cdf(&truncated.join("\n")).unwrap_err().to_string();
        assert!(err.contains("never terminated"), "{err}");
    }

    #[test]
    fn unsupported_bus_type_is_rejected() {
        let text = fixture("ieee14.cdf").replacen("  1  1  3", "  1  1  5", 1);
        let err = parse_cdf(&text).unwrap_err().to_string();
        assert!(err.contains("unsupported bus type 5"), "{err}");
    }

    #[test]
    fn branch_to_unknown_bus_is_rejected() {
        let text = fixture("ieee14.cdf").replace("  13   14  1  1 1 0", "  13   77  1  1 1 0");
        let err = parse_cdf(&text).unwrap_err().to_string();
        assert!(err.contains("77"), "{err}");
    }

    #[test]
    fn model_export_survives_a_round_trip() {
        use crate::model::{BranchSpec, BusSpec, NetworkSpec};
        let net = build_network(&NetworkSpec {
            id: "export".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    v_mag: 1.02,
                    name: "SOURCE".into(),
                    ..BusSpec::new("1")
                },
                BusSpec {
                    kind: BusKind::PV,
                    v_mag: 1.05,
                    gen_p: 0.25,
                    q_max: Some(0.3),
                    q_min: Some(-0.1),
                    ..BusSpec::new("2")
                },
                BusSpec {
                    load_p: 0.5,
                    load_q: 0.25,
                    shunt_b: 0.05,
                    ..BusSpec::new("3")
                },
            ],
            branches: vec![
                BranchSpec::line("1", "3", 0.1),
                BranchSpec {
                    kind: BranchKind::Transformer,
                    tap: 0.95,
                    x: 0.2,
                    ..BranchSpec::line("2", "3", 0.2)
                },
            ],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap();

        let text = write_cdf(&CdfDocument::from_network(net.clone())).unwrap();
        let back = parse_cdf(&text).unwrap().network;
        assert_eq!(back.buses.len(), 3);
        let b2 = back.bus("2").unwrap();
        assert_eq!(b2.kind, BusKind::PV);
        assert_eq!(b2.v_mag, 1.05);
        assert_eq!(b2.gen_p, 0.25);
        assert_eq!(b2.q_max, Some(0.3));
        assert_eq!(b2.q_min, Some(-0.1));
        assert_eq!(back.bus("3").unwrap().shunt_b, 0.05);
        let t = back.branch("2-3").unwrap();
        assert_eq!(t.kind, BranchKind::Transformer);
        assert_eq!(t.tap, 0.95);
        assert_eq!(back.branch("1-3").unwrap().kind, BranchKind::Line);
    }

    #[test]
    fn non_numeric_ids_are_renumbered_in_order() {
        use crate::model::{BranchSpec, BusSpec, NetworkSpec};
        let net = build_network(&NetworkSpec {
            id: "names".into(),
            buses: vec![
                BusSpec {
                    kind: BusKind::Slack,
                    ..BusSpec::new("alpha")
                },
                BusSpec {
                    load_p: 0.25,
                    ..BusSpec::new("beta")
                },
            ],
            branches: vec![BranchSpec::line("alpha", "beta", 0.1)],
            ..NetworkSpec::default()
        })
        .unwrap()
        .extend_layer(Layer::AcLoadflow)
        .unwrap();
        let text = write_cdf(&CdfDocument::from_network(net)).unwrap();
        let back = parse_cdf(&text).unwrap().network;
        assert_eq!(back.buses[0].id, "1");
        assert_eq!(back.buses[1].id, "2");
        assert_eq!(back.buses[0].name, "alpha");
        assert_eq!(back.branches[0].from_bus, "1");
        assert!((back.buses[1].load_p - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_impedance_branch_is_rejected_by_validation() {
        let text = fixture("ieee14.cdf").replace("   0.17615", "   0.00000");
        let err = parse_cdf(&text).unwrap_err().to_string();
        assert!(err.contains(&format!("{Z_MIN:e}")) || err.contains("impedance"), "{err}");
    }
}
