//! Serde helpers for wide integers in JSON.

/// Serializes a `u128` as a JSON number while it fits in 53 bits (so every
/// JSON reader gets it exactly) and as a decimal string beyond that.
/// Deserialization accepts both forms.
pub mod int53 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    const MAX_EXACT: u128 = 1 << 53;

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        if *v <= MAX_EXACT {
            s.serialize_u64(*v as u64)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wide {
            Num(u64),
            Str(String),
        }
        match Wide::deserialize(d)? {
            Wide::Num(n) => Ok(n as u128),
            Wide::Str(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

/// [`int53`](self::int53) for optional values; `None` maps to JSON `null`.
pub mod int53_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u128>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::int53::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u128>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::int53")] u128);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}
