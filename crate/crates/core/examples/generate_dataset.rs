//! Writes the bundled synthetic dataset: 30 playable series (10 per trend
//! label) and 9 co-dated world indices, plus the manifest.
//!
//! Usage: cargo run -p mrbanks-core --example generate_dataset -- [OUT_DIR] [SEED]

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use mrbanks_core::domain::TrendLabel;
use mrbanks_core::market::{
    classify_trend, count_ties, DatasetManifest, ManifestEntry, PricePoint, PriceSeries, SeriesMeta,
    DEFAULT_FLAT_THRESHOLD, MIN_SERIES_LEN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const PER_TREND: usize = 10;
const SERIES_LEN: usize = MIN_SERIES_LEN + 5;
const CALENDAR_DAYS: usize = 520;
const WORLD: [&str; 9] = ["DJI", "SPX", "NDX", "FTSE", "DAX", "CAC", "N225", "HSI", "IBEX"];

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn walk(rng: &mut ChaCha8Rng, dates: &[NaiveDate], start: f64, drift: f64, vol: f64) -> Vec<PricePoint> {
    let noise = Normal::new(drift, vol).expect("valid normal");
    let mut price = start;
    let mut out: Vec<PricePoint> = Vec::with_capacity(dates.len());
    for &date in dates {
        let mut close = (price * 100.0).round() / 100.0;
        if let Some(prev) = out.last() {
            if close == prev.close {
                close += 0.01;
            }
        }
        out.push(PricePoint { date, close });
        price = close * noise.sample(rng).exp();
    }
    out
}

fn write_series(dir: &Path, name: &str, points: &[PricePoint], meta: &SeriesMeta) -> ManifestEntry {
    let file = PathBuf::from(format!("series/{name}.csv"));
    let meta_file = PathBuf::from(format!("series/{name}.meta.json"));
    let mut w = csv::Writer::from_path(dir.join(&file)).expect("create csv");
    w.write_record(["date", "close"]).unwrap();
    for p in points {
        w.write_record([p.date.to_string(), format!("{:.2}", p.close)]).unwrap();
    }
    w.flush().unwrap();
    fs::write(dir.join(&meta_file), serde_json::to_string_pretty(meta).unwrap()).unwrap();
    ManifestEntry { file, meta: meta_file }
}

fn main() {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let seed: u64 = args.next().map(|s| s.parse().expect("numeric seed")).unwrap_or(2007);
    fs::create_dir_all(out.join("series")).expect("create output dir");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let calendar = business_days(NaiveDate::from_ymd_opt(2007, 1, 2).unwrap(), CALENDAR_DAYS);
    let mut manifest = DatasetManifest {
        description: format!("Synthetic tie-free daily closes, generator seed {seed}"),
        flat_threshold: DEFAULT_FLAT_THRESHOLD,
        series: Vec::new(),
        world: Vec::new(),
    };

    let plan = [
        (TrendLabel::Bullish, 0.004),
        (TrendLabel::Bearish, -0.004),
        (TrendLabel::Flat, 0.0),
    ];
    let mut k = 0;
    for (label, drift) in plan {
        for _ in 0..PER_TREND {
            let offset = (k * 15) % (CALENDAR_DAYS - SERIES_LEN);
            let dates = &calendar[offset..offset + SERIES_LEN];
            let symbol = format!("SYN{:02}", k + 1);
            let series = loop {
                let start = 20.0 + 180.0 * rng.random::<f64>();
                let points = walk(&mut rng, dates, start, drift, 0.012);
                let s = PriceSeries::new(&symbol, points, 30).expect("valid series");
                let computed = classify_trend(&s, s.playable_window(), DEFAULT_FLAT_THRESHOLD).unwrap();
                let ret = (s.close(SERIES_LEN - 1) / s.close(30)).ln();
                let margin = (ret.abs() - DEFAULT_FLAT_THRESHOLD).abs() > 0.01;
                if computed == label && margin && count_ties(&s) == 0 {
                    break s;
                }
            };
            let meta = SeriesMeta {
                symbol: symbol.clone(),
                playable_offset: 30,
                trend: Some(label),
            };
            manifest.series.push(write_series(&out, &symbol, series.points(), &meta));
            k += 1;
        }
    }

    for symbol in WORLD {
        let points = loop {
            let start = 1000.0 + 9000.0 * rng.random::<f64>();
            let p = walk(&mut rng, &calendar, start, 0.0002, 0.01);
            if p.windows(2).all(|w| w[0].close != w[1].close) {
                break p;
            }
        };
        let meta = SeriesMeta {
            symbol: symbol.into(),
            playable_offset: 0,
            trend: None,
        };
        manifest.world.push(write_series(&out, &format!("world_{symbol}"), &points, &meta));
    }

    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    println!("wrote {} series and {} world indices to {}", manifest.series.len(), manifest.world.len(), out.display());
}
