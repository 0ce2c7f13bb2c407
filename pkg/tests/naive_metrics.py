"""Per-point recount used as an oracle for the vectorised evaluator."""


def recount(pred_by_index, truth, classes):
    """``pred_by_index``: {point_index: label}; ``truth``: {point_index: label}."""
    tp = [0] * classes
    fp = [0] * classes
    fn = [0] * classes
    for idx, g in truth.items():
        if idx not in pred_by_index:
            fn[g] += 1
            continue
        p = pred_by_index[idx]
        if p == g:
            tp[g] += 1
        else:
            fp[p] += 1
            fn[g] += 1
    return tp, fp, fn
