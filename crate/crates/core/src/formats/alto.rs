use super::{parse_points, xml_document, FormatError, Parsed};
use crate::geometry::{BBox, Polygon};

/// OCR word with its outline.
#[derive(Debug, Clone, PartialEq)]
pub struct WordBox {
    pub polygon: Polygon,
    pub text: String,
}

fn float_attr(node: roxmltree::Node<'_, '_>, name: &str) -> Option<f64> {
    node.attribute(name)?.trim().parse().ok().filter(|v: &f64| v.is_finite())
}

/// Reads every `String` element of an ALTO document. A `Shape/Polygon`
/// outline is preferred; otherwise the `HPOS/VPOS/WIDTH/HEIGHT` rectangle
/// is used.
pub fn parse_alto(bytes: &[u8]) -> Result<Parsed<WordBox>, FormatError> {
    let doc = xml_document(bytes)?;
    let mut out = Parsed::default();
    for word in doc
        .descendants()
        .filter(|d| d.is_element() && d.tag_name().name() == "String")
    {
        let text = word.attribute("CONTENT").unwrap_or_default().to_owned();
        let outline = word
            .descendants()
            .find(|d| d.is_element() && d.tag_name().name() == "Polygon")
            .and_then(|p| p.attribute("POINTS"))
            .and_then(parse_points)
            .and_then(|pts| Polygon::new(pts).ok());
        let polygon = outline.or_else(|| {
            let (x, y) = (float_attr(word, "HPOS")?, float_attr(word, "VPOS")?);
            let (w, h) = (float_attr(word, "WIDTH")?, float_attr(word, "HEIGHT")?);
            let b = BBox::from_float_xywh(x, y, w, h);
            (!b.is_degenerate()).then(|| Polygon::from_bbox(&b))
        });
        match polygon {
            Some(polygon) => out.items.push(WordBox { polygon, text }),
            None => out
                .warnings
                .push(format!("String {text:?}: no usable geometry")),
        }
    }
    Ok(out)
}
