//! JSON Schema documents served under `/schema`, versioned with the payloads.

use gridpulse::model::Attribute;
use serde_json::{json, Value};

use crate::api::SCHEMA_VERSION;

pub const NAMES: [&str; 7] = ["analyze", "dendrogram", "embedding", "timeline", "topology", "events", "error"];

fn datetime() -> Value {
    json!({"type": "string", "description": "ISO 8601 local time, e.g. 2017-04-20T20:05:00"})
}

fn attribute() -> Value {
    let codes: Vec<&str> = Attribute::ALL.iter().map(|a| a.code()).collect();
    json!({"type": "string", "enum": codes})
}

fn pmu_list() -> Value {
    json!({"type": "array", "items": {"type": "integer", "minimum": 0}})
}

fn window() -> Value {
    json!({"type": "integer", "enum": [2, 5, 10]})
}

fn nullable(kind: &str) -> Value {
    json!({"type": [kind, "null"]})
}

fn document(name: &str, request: Option<Value>, response: Value) -> Value {
    let mut doc = json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$id": format!("/schema/{name}"),
        "version": SCHEMA_VERSION,
        "response": response,
    });
    if let Some(r) = request {
        doc["request"] = r;
    }
    doc
}

fn params_echo(props: Value) -> Value {
    json!({"type": "object", "description": "resolved request with defaults filled in", "properties": props})
}

pub fn schema(name: &str) -> Option<Value> {
    let envelope = |extra: Value| {
        let mut props = json!({"schema_version": {"const": SCHEMA_VERSION}});
        for (k, v) in extra.as_object().expect("object") {
            props[k] = v.clone();
        }
        json!({"type": "object", "properties": props})
    };
    Some(match name {
        "analyze" => {
            let req = json!({
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "event_id": {"type": "string"},
                    "from": datetime(),
                    "to": datetime(),
                    "window_s": window(),
                    "stride_s": {"type": "integer", "minimum": 1},
                    "attribute": attribute(),
                    "threshold_pct": {"type": "number", "exclusiveMinimum": 0, "maximum": 100},
                    "pmu_ids": pmu_list(),
                    "at": datetime(),
                    "bandwidth": {"type": "number", "exclusiveMinimum": 0},
                    "resolution": {"type": "integer", "minimum": 16, "maximum": 1024}
                }
            });
            let frame = json!({
                "type": "object",
                "properties": {
                    "start": datetime(),
                    "frequency_hz": nullable("number"),
                    "peak_pmu": nullable("integer"),
                    "peak_magnitude": nullable("number"),
                    "valid_pmus": {"type": "integer"},
                    "flags": {"type": "array", "items": {"type": "object", "properties": {
                        "pmu": {"type": "integer"}, "magnitude": {"type": "number"}, "rank": {"type": "integer"}}}},
                    "ranking": {"type": "array", "items": {"type": "object", "properties": {
                        "pmu": {"type": "integer"}, "magnitude": {"type": "number"}, "rank": {"type": "integer"}}}}
                }
            });
            let focus = json!({
                "type": ["object", "null"],
                "properties": {
                    "index": {"type": "integer"},
                    "start": datetime(),
                    "frequency_hz": nullable("number"),
                    "bin_hz": {"type": "number"},
                    "peak_pmu": nullable("integer"),
                    "spectra": {"type": "array", "items": {"type": "object", "properties": {
                        "pmu": {"type": "integer"}, "valid": {"type": "boolean"},
                        "magnitudes": {"type": "array", "items": {"type": "number"}}}}},
                    "correlation": {"type": "object", "additionalProperties": {"type": "number", "minimum": -1, "maximum": 1}},
                    "kde": {"type": "object", "properties": {
                        "bbox": {"type": "object"}, "nx": {"type": "integer"}, "ny": {"type": "integer"},
                        "bandwidth": {"type": "number"}, "values": {"type": "array", "items": {"type": "number"}}}}
                }
            });
            document(
                "analyze",
                Some(req),
                envelope(json!({
                    "params": params_echo(json!({"from": datetime(), "to": datetime(), "window_s": window()})),
                    "frames": {"type": "array", "items": frame},
                    "focus": focus
                })),
            )
        }
        "dendrogram" => {
            let req = json!({
                "type": "object",
                "additionalProperties": false,
                "required": ["epicenter_ids", "at"],
                "properties": {
                    "epicenter_ids": pmu_list(),
                    "selected_ids": pmu_list(),
                    "at": datetime(),
                    "window_s": window(),
                    "attribute": attribute(),
                    "k": {"oneOf": [{"const": "auto"}, {"type": "integer", "minimum": 1}]}
                }
            });
            let cluster = json!({
                "type": "object",
                "properties": {
                    "id": {"type": "string", "description": "\"root\" or h{hop}c{label}"},
                    "hop": {"type": "integer"},
                    "pmus": pmu_list(),
                    "mean_spectrum": {"type": "array", "items": {"type": "number"}},
                    "swatch": {"type": "number"},
                    "box_stats": {"type": ["object", "null"]},
                    "self_links": {"type": "integer"},
                    "intra_hop_links": {"type": "integer"},
                    "inter_hop_links": {"type": "integer"}
                }
            });
            document(
                "dendrogram",
                Some(req),
                envelope(json!({
                    "params": params_echo(json!({"epicenter_ids": pmu_list(), "at": datetime()})),
                    "model": {"type": "object", "properties": {
                        "at": datetime(),
                        "frequency_hz": {"type": "number"},
                        "root": cluster,
                        "layers": {"type": "array", "items": {"type": "object", "properties": {
                            "hop": {"type": "integer"}, "k": {"type": "integer"},
                            "silhouette": nullable("number"), "clusters": {"type": "array", "items": cluster}}}},
                        "links": {"type": "array", "items": {"type": "object", "properties": {
                            "kind": {"enum": ["self", "intra_hop", "inter_hop"]},
                            "from": {"type": "string"}, "to": {"type": "string"}, "count": {"type": "integer"}}}},
                        "flows": {"type": "array", "items": {"type": "object", "properties": {
                            "from": {"type": "string"}, "to": {"type": "string"},
                            "l1_distance": {"type": "number"}, "weight": {"type": "number"}}}},
                        "unreachable": pmu_list(),
                        "no_data": pmu_list()
                    }}
                })),
            )
        }
        "embedding" => {
            let req = json!({
                "type": "object",
                "additionalProperties": false,
                "required": ["at"],
                "properties": {
                    "selected_ids": pmu_list(),
                    "at": datetime(),
                    "window_s": window(),
                    "attribute": attribute(),
                    "perplexity": {"type": "number", "exclusiveMinimum": 0},
                    "seed": {"type": "integer", "minimum": 0},
                    "epicenter_id": {"type": "integer"},
                    "collision_radius": {"type": "number", "exclusiveMinimum": 0}
                }
            });
            document(
                "embedding",
                Some(req),
                envelope(json!({
                    "params": params_echo(json!({"perplexity": {"type": "number"}, "seed": {"type": "integer"}})),
                    "points": {"type": "array", "items": {"type": "object", "properties": {
                        "pmu": {"type": "integer"}, "x": {"type": "number"}, "y": {"type": "number"}}}},
                    "rings": {"type": "array", "items": {"type": "object", "properties": {
                        "hop": {"type": "integer"}, "radius": {"type": "number"}, "count": {"type": "integer"}}}},
                    "kl_divergence": {"type": "number"},
                    "overlaps": {"type": "integer"},
                    "no_data": pmu_list()
                })),
            )
        }
        "timeline" => {
            let query = json!({
                "type": "object",
                "description": "query string parameters",
                "required": ["from", "to"],
                "properties": {
                    "from": datetime(),
                    "to": datetime(),
                    "window_s": window(),
                    "stride_s": {"type": "integer", "minimum": 1},
                    "attribute": attribute(),
                    "pmu_ids": {"type": "string", "description": "comma-separated PMU ids"}
                }
            });
            document(
                "timeline",
                Some(query),
                envelope(json!({
                    "params": params_echo(json!({"from": datetime(), "to": datetime()})),
                    "entries": {"type": "array", "items": {"type": "object", "properties": {
                        "t": datetime(), "frequency_hz": nullable("number"), "peak_pmu": nullable("integer"),
                        "peak_magnitude": nullable("number"), "gap": {"type": "boolean"}}}}
                })),
            )
        }
        "topology" => document(
            "topology",
            None,
            envelope(json!({
                "counts": {"type": "object", "additionalProperties": {"type": "integer"}},
                "topology": {"type": "object", "required": ["substations", "buses", "edges", "pmus"]}
            })),
        ),
        "events" => document(
            "events",
            None,
            envelope(json!({
                "events": {"type": "array", "items": {"type": "object", "required": ["id", "kind", "provenance"]}},
                "reports": {"type": "array", "items": {"type": "object", "properties": {
                    "matched_substations": {"type": "array"}, "warnings": {"type": "array"}}}}
            })),
        ),
        "error" => document(
            "error",
            None,
            json!({"type": "object", "required": ["error"], "properties": {"error": {
                "type": "object",
                "properties": {
                    "code": {"enum": ["bad_request", "not_found", "out_of_range", "internal"]},
                    "message": {"type": "string"}
                }
            }}}),
        ),
        _ => return None,
    })
}

pub fn index() -> Value {
    json!({
        "version": SCHEMA_VERSION,
        "schemas": NAMES.iter().map(|n| format!("/schema/{n}")).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_schema_exists() {
        for n in NAMES {
            let s = schema(n).unwrap();
            assert_eq!(s["version"], SCHEMA_VERSION);
        }
        assert!(schema("nope").is_none());
    }
}
