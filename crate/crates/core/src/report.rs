//! Serialization helpers shared by the pipeline report and the API.

use crate::pipeline::PipelineReport;
use crate::selection::ReqId;

/// Writes `±inf` and NaN as the strings `"inf"`, `"-inf"`, `"nan"` so that
/// degenerate index values survive a JSON round trip.
pub mod maybe_infinite {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Pretty JSON with a trailing newline. Key order is fixed by the types, so
/// equal reports always produce identical bytes.
pub fn to_json(report: &PipelineReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report types always serialize");
    s.push('\n');
    s
}

/// One row per (k, algorithm): the four indexes and whether it won.
pub fn scoreboard_csv(report: &PipelineReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "k",
        "algorithm",
        "connectivity",
        "dunn",
        "silhouette",
        "calinski_harabasz",
        "winner",
    ])
    .expect("writing to memory");
    for analysis in &report.analyses {
        for r in &analysis.validity {
            w.write_record([
                r.k.to_string(),
                r.algorithm.to_string(),
                fmt(r.connectivity),
                fmt(r.dunn),
                fmt(r.silhouette),
                fmt(r.calinski_harabasz),
                (r.algorithm == analysis.tournament.winner).to_string(),
            ])
            .expect("writing to memory");
        }
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}

/// One row per requirement and analysed k: cluster, category and selection.
pub fn assignments_csv(report: &PipelineReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "k",
        "requirement",
        "effort",
        "satisfaction",
        "cluster",
        "category",
        "core",
        "viable",
    ])
    .expect("writing to memory");
    for analysis in &report.analyses {
        let viable = analysis.plan.viable_set();
        for p in &analysis.points {
            w.write_record([
                analysis.k.to_string(),
                p.id.clone(),
                fmt(p.effort),
                fmt(p.satisfaction),
                p.cluster.to_string(),
                format!("{:?}", p.category),
                analysis.plan.core_set.contains(&ReqId(p.id.clone())).to_string(),
                viable.contains(&ReqId(p.id.clone())).to_string(),
            ])
            .expect("writing to memory");
        }
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}
