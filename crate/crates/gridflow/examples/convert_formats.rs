//! Round-tripping a case between the two interchange formats.
//!
//! The IEEE common data format (CDF) is the classic fixed-column text
//! format most published test systems ship in; the JSON interchange format
//! is this library's own lossless serialization of a network model. This
//! example converts an IEEE 14-bus case CDF -> JSON -> CDF and shows that
//! a second parse/write cycle is a fixpoint: once normalized, the CDF text
//! stops changing.
//!
//!     cargo run --example convert_formats

use std::fs;
use std::path::Path;

use gridflow::cdf::{parse_cdf, write_cdf, CdfDocument};
use gridflow::interchange::{read_interchange, write_interchange};

fn main() -> gridflow::Result<()> {
    let source = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ieee14.cdf");
    let original = fs::read_to_string(&source)?;
    println!("source: {} ({} bytes)", source.display(), original.len());

    // CDF -> network model. The parse validates topology and electrical
    // data; anything malformed is rejected with line-level diagnostics.
    let net = parse_cdf(&original)?.network;
    println!(
        "parsed: {} buses, {} branches, base {} MVA, id {:?}",
        net.buses.len(),
        net.branches.len(),
        net.base_mva,
        net.id
    );

    let dir = tempfile::tempdir()?;

    // Network model -> JSON interchange. This serialization is lossless:
    // reading it back yields a structurally equal model.
    let json = write_interchange(&net)?;
    let json_path = dir.path().join("ieee14.json");
    fs::write(&json_path, &json)?;
    let reread = read_interchange(&json)?;
    println!(
        "json:   {} bytes, lossless round trip: {}",
        json.len(),
        if reread == net { "yes" } else { "NO" }
    );

    // Network model -> CDF. The writer renders normalized fixed columns,
    // so the first rewrite may differ textually from the hand-maintained
    // original even though the data agrees.
    let cdf_once = write_cdf(&CdfDocument::from_network(reread))?;
    let cdf_path = dir.path().join("ieee14.cdf");
    fs::write(&cdf_path, &cdf_once)?;
    println!(
        "cdf:    rewritten {} bytes (original {}), normalized layout",
        cdf_once.len(),
        original.len()
    );

    // Fixpoint check: parse the rewritten CDF and write it again. From the
    // second cycle on the text is stable byte for byte.
    let cdf_twice = write_cdf(&CdfDocument::from_network(parse_cdf(&cdf_once)?.network))?;
    println!(
        "parse ∘ write fixpoint after one normalization: {}",
        if cdf_twice == cdf_once { "yes (byte-identical)" } else { "NO" }
    );

    // And the electrical content survives both hops.
    let back = parse_cdf(&cdf_twice)?.network;
    let worst_v = net
        .buses
        .iter()
        .zip(&back.buses)
        .map(|(a, b)| (a.v_mag - b.v_mag).abs())
        .fold(0.0f64, f64::max);
    println!("largest |ΔV| between source and twice-converted model: {worst_v:.2e} pu");
    Ok(())
}
