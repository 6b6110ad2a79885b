use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::draw_value;
use crate::model::{normalize_value, DbResults, DialogState, DONTCARE};
use crate::schema::DomainSchema;

pub const DEFAULT_RECORDS_PER_DOMAIN: usize = 10;

type Record = BTreeMap<String, String>;

/// Seeded records for every service. Each record fills every slot of its
/// schema, so it covers the result slots of all intents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SyntheticDb {
    schemas: Vec<DomainSchema>,
    records: BTreeMap<String, Vec<Record>>,
}

impl SyntheticDb {
    pub fn generate(schemas: &[DomainSchema], seed: u64, per_domain: usize) -> Self {
        let mut records = BTreeMap::new();
        for (i, schema) in schemas.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let rows = (0..per_domain)
                .map(|_| {
                    schema
                        .slots
                        .iter()
                        .map(|s| (s.name.clone(), draw_value(&mut rng, schema, &s.name)))
                        .collect()
                })
                .collect();
            records.insert(schema.service_name.clone(), rows);
        }
        SyntheticDb {
            schemas: schemas.to_vec(),
            records,
        }
    }

    /// Builds a database from explicit records.
    pub fn from_records(schemas: &[DomainSchema], records: BTreeMap<String, Vec<Record>>) -> Self {
        SyntheticDb {
            schemas: schemas.to_vec(),
            records,
        }
    }

    pub fn records(&self, domain: &str) -> &[Record] {
        self.records.get(domain).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Records of `domain` matching every constraint of that domain in
    /// `state`, in insertion order, projected onto the result slots of the
    /// active intent. `dontcare` matches anything.
    pub fn query(&self, domain: &str, state: &DialogState) -> DbResults {
        let constraints = state.domain_values(domain);
        let intent = self
            .schemas
            .iter()
            .find(|s| s.service_name == domain)
            .and_then(|s| state.active_intent.name().and_then(|n| s.intent(n)));
        let matches = |r: &Record| {
            constraints.iter().all(|(slot, values)| {
                values.iter().any(|v| v == DONTCARE)
                    || r.get(*slot)
                        .is_some_and(|have| values.iter().any(|v| normalize_value(v) == normalize_value(have)))
            })
        };
        let project = |r: &Record| -> Record {
            match intent {
                Some(i) => i
                    .result_slots
                    .iter()
                    .filter_map(|s| r.get(s).map(|v| (s.clone(), v.clone())))
                    .collect(),
                None => r.clone(),
            }
        };
        DbResults {
            query_intent: intent.map(|i| i.name.clone()).unwrap_or_default(),
            records: self
                .records(domain)
                .iter()
                .filter(|r| matches(r))
                .map(project)
                .collect(),
        }
    }
}
