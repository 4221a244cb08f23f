//! SPE1 container.
//!
//! ```text
//! "SPE1" | u32 version=1 | u32 layers | u32 dim
//! per sentence: u32 id_len | id bytes (UTF-8) | u32 n | layers*n*dim f32
//! ```
//!
//! Integers and floats are little-endian; floats are ordered
//! `[layer][token][component]`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use ndarray::Array3;

use super::{EmbeddingError, EmbeddingSet};

pub const MAGIC: &[u8; 4] = b"SPE1";
pub const VERSION: u32 = 1;

fn put_u32<W: Write>(sink: &mut W, value: u32) -> io::Result<()> {
    sink.write_all(&value.to_le_bytes())
}

fn to_u32(value: usize, what: &'static str) -> io::Result<u32> {
    u32::try_from(value)
        .map_err(|_| io::Error::new(ErrorKind::InvalidInput, format!("{what} exceeds u32")))
}

/// Write `set` to `sink`, returning the number of bytes written.
pub fn write_embeddings<W: Write>(set: &EmbeddingSet, sink: &mut W) -> Result<u64, EmbeddingError> {
    let mut written = 0u64;
    sink.write_all(MAGIC)?;
    put_u32(sink, VERSION)?;
    put_u32(sink, to_u32(set.layers(), "layer count")?)?;
    put_u32(sink, to_u32(set.dim(), "dimension")?)?;
    written += 16;

    for sentence in set.sentences() {
        let id = sentence.sent_id.as_bytes();
        put_u32(sink, to_u32(id.len(), "sent_id length")?)?;
        sink.write_all(id)?;
        put_u32(sink, to_u32(sentence.n_tokens(), "token count")?)?;
        written += 8 + id.len() as u64;

        let data = sentence.data();
        let mut buf = Vec::with_capacity(data.len() * 4);
        // iter() visits elements in logical [layer][token][component] order.
        for v in data.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
        written += buf.len() as u64;
    }
    Ok(written)
}

/// Fill `buf`, distinguishing a clean end of stream (`Ok(false)`) from a
/// partial read (`UnexpectedEof`).
fn read_or_eof<R: Read>(source: &mut R, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(ErrorKind::UnexpectedEof.into()),
            Ok(k) => filled += k,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

fn get_u32<R: Read>(source: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    source.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_embeddings<R: Read>(source: &mut R) -> Result<EmbeddingSet, EmbeddingError> {
    let mut magic = [0u8; 4];
    match read_or_eof(source, &mut magic) {
        Ok(true) => {}
        Ok(false) => return Err(EmbeddingError::TruncatedHeader),
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
            return Err(EmbeddingError::TruncatedHeader)
        }
        Err(e) => return Err(e.into()),
    }
    if &magic != MAGIC {
        return Err(EmbeddingError::BadMagic { found: magic });
    }
    let header = |e: io::Error| match e.kind() {
        ErrorKind::UnexpectedEof => EmbeddingError::TruncatedHeader,
        _ => EmbeddingError::Io(e),
    };
    let version = get_u32(source).map_err(header)?;
    if version != VERSION {
        return Err(EmbeddingError::UnsupportedVersion(version));
    }
    let layers = get_u32(source).map_err(header)? as usize;
    let dim = get_u32(source).map_err(header)? as usize;

    let mut set = EmbeddingSet::new(layers, dim);
    loop {
        let sentence = set.len();
        let truncated = |e: io::Error| match e.kind() {
            ErrorKind::UnexpectedEof => EmbeddingError::Truncated { sentence },
            _ => EmbeddingError::Io(e),
        };

        let mut len_bytes = [0u8; 4];
        if !read_or_eof(source, &mut len_bytes).map_err(truncated)? {
            break;
        }
        let id_len = u32::from_le_bytes(len_bytes) as usize;
        let mut id = Vec::new();
        source
            .by_ref()
            .take(id_len as u64)
            .read_to_end(&mut id)
            .map_err(truncated)?;
        if id.len() != id_len {
            return Err(EmbeddingError::Truncated { sentence });
        }
        let sent_id = String::from_utf8(id).map_err(|_| EmbeddingError::BadSentId { sentence })?;

        let n = get_u32(source).map_err(truncated)? as usize;
        let count = layers * n * dim;
        let mut raw = Vec::new();
        source
            .by_ref()
            .take(count as u64 * 4)
            .read_to_end(&mut raw)
            .map_err(truncated)?;
        if raw.len() != count * 4 {
            return Err(EmbeddingError::Truncated { sentence });
        }
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let data = Array3::from_shape_vec((layers, n, dim), values).expect("length checked");
        set.push(sent_id, data)?;
    }
    Ok(set)
}

pub fn write_embeddings_file(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<u64, EmbeddingError> {
    let mut sink = BufWriter::new(File::create(path)?);
    let n = write_embeddings(set, &mut sink)?;
    sink.flush()?;
    Ok(n)
}

pub fn read_embeddings_file(path: impl AsRef<Path>) -> Result<EmbeddingSet, EmbeddingError> {
    read_embeddings(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(set: &EmbeddingSet) -> Vec<u8> {
        let mut buf = Vec::new();
        let n = write_embeddings(set, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        buf
    }

    #[test]
    fn empty_set_is_header_only() {
        let set = EmbeddingSet::new(3, 8);
        let buf = encode(&set);
        assert_eq!(buf.len(), 16);
        assert_eq!(&buf[..4], b"SPE1");
        assert_eq!(read_embeddings(&mut buf.as_slice()).unwrap(), set);
    }

    #[test]
    fn record_layout() {
        let mut set = EmbeddingSet::new(2, 4);
        let data = Array3::from_shape_fn((2, 3, 4), |(l, t, c)| (l * 100 + t * 10 + c) as f32);
        set.push("ab", data).unwrap();
        let buf = encode(&set);
        // header + id_len + "ab" + n + 2*3*4 floats
        assert_eq!(buf.len(), 16 + 4 + 2 + 4 + 2 * 3 * 4 * 4);
        assert_eq!(&buf[16..20], &2u32.to_le_bytes());
        assert_eq!(&buf[22..26], &3u32.to_le_bytes());
        let first = 26;
        let at = |k: usize| f32::from_le_bytes(buf[first + 4 * k..first + 4 * k + 4].try_into().unwrap());
        assert_eq!(at(0), 0.0);
        assert_eq!(at(5), 11.0); // layer 0, token 1, component 1
        assert_eq!(at(12), 100.0); // layer 1, token 0, component 0
    }

    #[test]
    fn wrong_magic() {
        let mut buf = encode(&EmbeddingSet::new(1, 1));
        buf[0] = b'X';
        assert!(matches!(
            read_embeddings(&mut buf.as_slice()),
            Err(EmbeddingError::BadMagic { .. })
        ));
    }

    #[test]
    fn truncated_record_names_sentence() {
        let mut set = EmbeddingSet::new(1, 2);
        set.push("a", Array3::zeros((1, 2, 2))).unwrap();
        set.push("b", Array3::zeros((1, 3, 2))).unwrap();
        let buf = encode(&set);
        for cut in [buf.len() - 1, buf.len() - 20, 16 + 4 + 1 + 4 + 16 + 2] {
            match read_embeddings(&mut &buf[..cut]) {
                Err(EmbeddingError::Truncated { sentence }) => assert_eq!(sentence, 1),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
        assert!(matches!(
            read_embeddings(&mut &buf[..10]),
            Err(EmbeddingError::TruncatedHeader)
        ));
    }

    #[test]
    fn nan_rejected_on_read() {
        let mut set = EmbeddingSet::new(1, 1);
        set.push("a", Array3::zeros((1, 1, 1))).unwrap();
        let mut buf = encode(&set);
        let at = buf.len() - 4;
        buf[at..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            read_embeddings(&mut buf.as_slice()),
            Err(EmbeddingError::NonFinite { sentence: 0 })
        ));
    }

    #[test]
    fn bad_version() {
        let mut buf = encode(&EmbeddingSet::new(1, 1));
        buf[4] = 9;
        assert!(matches!(
            read_embeddings(&mut buf.as_slice()),
            Err(EmbeddingError::UnsupportedVersion(9))
        ));
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            layers in 1usize..4,
            dim in 1usize..6,
            lens in prop::collection::vec(1usize..6, 0..5),
            bits in prop::collection::vec(any::<u32>(), 400),
        ) {
            let mut set = EmbeddingSet::new(layers, dim);
            let mut k = 0;
            for (i, n) in lens.iter().enumerate() {
                let data = Array3::from_shape_fn((layers, *n, dim), |_| {
                    let mut v = f32::from_bits(bits[k % bits.len()]);
                    k += 1;
                    if !v.is_finite() { v = k as f32; }
                    v
                });
                set.push(format!("sent-{i}-é"), data).unwrap();
            }
            let buf = encode(&set);
            let back = read_embeddings(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), set.len());
            for (a, b) in set.sentences().iter().zip(back.sentences()) {
                prop_assert_eq!(&a.sent_id, &b.sent_id);
                let ab: Vec<u32> = a.data().iter().map(|v| v.to_bits()).collect();
                let bb: Vec<u32> = b.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(ab, bb);
            }
        }
    }
}
