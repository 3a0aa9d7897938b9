//! Static SVG line plot of a result CSV: one polyline per method, value
//! against x. Reads only the CSV so it never touches the numerical path.

use std::collections::BTreeMap;
use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

pub fn csv_to_svg(csv: &str) -> Result<String, String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("missing column {name}"));
    let (cm, cx, cv, ce) = (col("method")?, col("x")?, col("value")?, col("experiment")?);

    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut experiment = String::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < header.len() {
            return Err(format!("short row: {line}"));
        }
        experiment = f[ce].to_string();
        let (Ok(x), Ok(v)) = (f[cx].parse::<f64>(), f[cv].parse::<f64>()) else { continue };
        if x.is_finite() && v.is_finite() {
            series.entry(f[cm].to_string()).or_default().push((x, v));
        }
    }
    let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    if all.is_empty() {
        return Err("no finite points to plot".into());
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{experiment}</text>"#, W / 2.0).unwrap();
    writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    )
    .unwrap();
    for (t, anchor) in [(x0, "start"), (x1, "end")] {
        writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="{anchor}">{t:.4}</text>"#, sx(t), H - PAD + 16.0).unwrap();
    }
    for t in [y0, y1] {
        writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{t:.4}</text>"#, PAD - 4.0, sy(t) + 4.0).unwrap();
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.join(" ")).unwrap();
        let ly = PAD + 14.0 * i as f64;
        writeln!(s, r#"<text x="{}" y="{ly:.1}" fill="{color}">{name}</text>"#, W - PAD - 110.0).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}
