use super::{parse_points, xml_document, FormatError, Parsed};
use crate::geometry::Polygon;

/// OCR textline: outline polygon, transcription and optional confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    pub polygon: Polygon,
    pub transcription: String,
    pub confidence: Option<f64>,
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children()
        .find(|c| c.is_element() && c.tag_name().name() == name)
}

/// Reads every `TextLine` of a PAGE-XML document. Region structure is ignored.
///
/// Lines whose `Coords` are missing or have fewer than three points are
/// skipped with a warning.
pub fn parse_pagexml(bytes: &[u8]) -> Result<Parsed<TextLine>, FormatError> {
    let doc = xml_document(bytes)?;
    let mut out = Parsed::default();
    for (n, line) in doc
        .descendants()
        .filter(|d| d.is_element() && d.tag_name().name() == "TextLine")
        .enumerate()
    {
        let label = line
            .attribute("id")
            .map_or_else(|| format!("#{n}"), str::to_owned);
        let points = child(line, "Coords")
            .and_then(|c| c.attribute("points"))
            .and_then(parse_points);
        let polygon = match points.map(Polygon::new) {
            Some(Ok(p)) => p,
            Some(Err(e)) => {
                out.warnings.push(format!("TextLine {label}: {e}"));
                continue;
            }
            None => {
                out.warnings
                    .push(format!("TextLine {label}: missing or unreadable Coords"));
                continue;
            }
        };
        let equiv = child(line, "TextEquiv");
        let transcription = equiv
            .and_then(|e| child(e, "Unicode"))
            .and_then(|u| u.text())
            .unwrap_or_default()
            .to_owned();
        let confidence = match equiv.and_then(|e| e.attribute("conf")) {
            None => None,
            Some(raw) => match raw.trim().parse::<f64>() {
                Ok(c) if (0.0..=1.0).contains(&c) => Some(c),
                _ => {
                    out.warnings
                        .push(format!("TextLine {label}: ignoring confidence {raw:?}"));
                    None
                }
            },
        };
        out.items.push(TextLine {
            polygon,
            transcription,
            confidence,
        });
    }
    Ok(out)
}
