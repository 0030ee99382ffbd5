import numpy as np
import pytest

from cellscope.schema import RawTable, fit_encoder, infer_schema


@pytest.fixture
def mixed_table():
    """Tiny fitted mixed table: 2 categorical + 2 numeric columns, 6 rows."""
    table = RawTable(
        {
            "color": ["red", "blue", "red", "green", "blue", "red"],
            "size": ["s", "m", "l", "s", "m", "l"],
            "height": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            "weight": [10.0, 12.0, 9.0, 14.0, 11.0, 13.0],
        }
    )
    schema = fit_encoder(table, infer_schema(table))
    return table, schema


def random_spans_layout(rng, n_cat=2, n_num=1, min_width=2, max_width=4):
    """Random schema-like layout for kernel tests, plus its total width."""
    from cellscope.schema import AttributeSpec, Kind, Schema

    attrs = []
    for j in range(n_cat):
        width = int(rng.integers(min_width, max_width + 1))
        attrs.append(
            AttributeSpec(
                f"c{j}", Kind.CATEGORICAL, categories=tuple(f"v{i}" for i in range(width))
            )
        )
    for j in range(n_num):
        attrs.append(AttributeSpec(f"n{j}", Kind.NUMERIC, mean=0.0, std_dev=1.0))
    schema = Schema(tuple(attrs))
    return schema, schema.layout()


def one_hot_targets(rng, layout, batch):
    """Random valid target matrix: one-hot categorical spans, numeric draws."""
    target = np.zeros((batch, layout.width))
    for start, width, _ in zip(
        layout.cat_starts.tolist(), layout.cat_widths.tolist(), layout.cat_attr_idx.tolist()
    ):
        hot = rng.integers(width, size=batch)
        target[np.arange(batch), start + hot] = 1.0
    target[:, layout.num_cols] = rng.normal(size=(batch, len(layout.num_cols)))
    return target
