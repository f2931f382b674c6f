use flowservo::bench::{SweepBatch, SweepConfig, SweepResult};
use flowservo::plot::{charts_for_csv, render_plots, render_svg, Chart, CsvKind, Series};
use flowservo::Method;

fn sweep_csv(ratios: &[usize]) -> Vec<u8> {
    let config = SweepConfig {
        environments: 16,
        max: 0.4 * ratios.len() as f64,
        ..Default::default()
    };
    SweepResult {
        config,
        methods: vec![Method::FlowDepthProxy],
        batches: ratios
            .iter()
            .enumerate()
            .map(|(i, &c)| SweepBatch {
                batch: i + 1,
                offset: 0.4 * (i + 1) as f64,
                converged: vec![c],
            })
            .collect(),
    }
    .to_csv()
}

fn polylines(doc: &roxmltree::Document) -> Vec<Vec<(f64, f64)>> {
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline") && n.attribute("class") == Some("series"))
        .map(|n| {
            n.attribute("points")
                .unwrap()
                .split_whitespace()
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

#[test]
fn sweep_plot_is_valid_xml_and_tracks_ratios() {
    let csv = sweep_csv(&[16, 14, 12, 9, 5, 1]);
    let (kind, _) = charts_for_csv(&csv).unwrap();
    assert_eq!(kind, CsvKind::Sweep);
    let svg = render_plots(&csv).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let lines = polylines(&doc);
    assert_eq!(lines.len(), 1);
    let pts = &lines[0];
    assert_eq!(pts.len(), 6);
    // SVG y grows downward: falling ratios give rising y.
    for w in pts.windows(2) {
        assert!(w[1].0 > w[0].0 && w[1].1 > w[0].1, "{w:?}");
    }
}

#[test]
fn rendering_is_deterministic() {
    let csv = sweep_csv(&[16, 15, 3]);
    assert_eq!(render_plots(&csv).unwrap(), render_plots(&csv).unwrap());
}

#[test]
fn empty_data_draws_axes_only() {
    let chart = Chart {
        title: "empty".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        series: vec![Series {
            name: "none".into(),
            points: vec![],
        }],
        y_range: None,
    };
    let svg = render_svg(&[chart]);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert!(doc.descendants().any(|n| n.attribute("class") == Some("axes")));
    assert!(polylines(&doc).iter().all(|p| p.is_empty()));

    let header_only = sweep_csv(&[]);
    let svg = render_plots(&header_only).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
}

#[test]
fn malformed_csv_reports_offset() {
    let mut csv = sweep_csv(&[16, 8]);
    csv.extend_from_slice(b"3,1.2,abc\n");
    match render_plots(&csv) {
        Err(flowservo::Error::Format { offset, .. }) => assert!(offset > 0),
        other => panic!("unexpected {other:?}"),
    }
    assert!(render_plots(b"").is_err());
}
