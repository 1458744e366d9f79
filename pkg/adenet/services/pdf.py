# services/pdf.py
import os
import datetime
from typing import Sequence

from reportlab.lib.pagesizes import A4
from reportlab.pdfgen import canvas
from reportlab.lib.units import cm
from reportlab.pdfbase import pdfmetrics
from reportlab.pdfbase.pdfmetrics import stringWidth
from reportlab.pdfbase.ttfonts import TTFont

from .report import CSV_COLUMNS, table_rows
from .simulation import MetricsTable

FONT_DIR = os.getenv("ADENET_FONT_DIR", "assets/fonts")
FONT_REG = os.path.join(FONT_DIR, "DejaVuSans.ttf")
FONT_BLD = os.path.join(FONT_DIR, "DejaVuSans-Bold.ttf")

if os.path.exists(FONT_REG) and os.path.exists(FONT_BLD):
    pdfmetrics.registerFont(TTFont("DejaVu", FONT_REG))
    pdfmetrics.registerFont(TTFont("DejaVu-Bold", FONT_BLD))
    F_MAIN, F_BOLD = "DejaVu", "DejaVu-Bold"
else:
    F_MAIN, F_BOLD = "Helvetica", "Helvetica-Bold"

HEADERS = ("rho", "n", "p", "|A|", "method", "MSE", "SE", "C", "IC", "exact")


def _fit(text: str, width: float, font: str, size: float) -> str:
    """Cut text to fit a cell."""
    while text and stringWidth(text, font, size) > width:
        text = text[:-1]
    return text


def _header(c, x0, y, col_w, size):
    c.setFont(F_BOLD, size)
    for i, h in enumerate(HEADERS):
        c.drawString(x0 + i * col_w, y, h)
    return y - 0.55 * cm


def render_study_pdf(tables: Sequence[MetricsTable], path: str, title: str = "Simulation study") -> str:
    """A4 report of reproduced tables: one block per scenario, Truth row first."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    c = canvas.Canvas(path, pagesize=A4)
    width, height = A4
    margin = 2 * cm
    x0, y = margin, height - margin
    col_w = (width - 2 * margin) / len(CSV_COLUMNS)
    size = 9

    c.setFont(F_BOLD, 16); c.drawString(x0, y, title); y -= 0.9 * cm
    c.setFont(F_MAIN, 10); c.drawString(x0, y, f"Date: {datetime.datetime.now().strftime('%Y-%m-%d %H:%M')}"); y -= 0.8 * cm

    for t in tables:
        s = t.scenario
        rows = table_rows([t])
        need = (len(rows) + 3) * 0.5 * cm
        if y - need < margin:
            c.showPage()
            y = height - margin
        c.setFont(F_BOLD, 12)
        c.drawString(x0, y, f"{s.name}: n={s.n}, p={s.p}, |A|={s.support_size}, rho={s.rho:g}, "
                            f"{s.replications} replications")
        y -= 0.6 * cm
        y = _header(c, x0, y, col_w, size)
        c.setFont(F_MAIN, size)
        for row in rows:
            for i, cell in enumerate(row):
                c.drawString(x0 + i * col_w, y, _fit(cell, col_w - 2, F_MAIN, size))
            y -= 0.48 * cm
        if t.nonconverged:
            c.drawString(x0, y, f"non-converged fits: {t.nonconverged}"); y -= 0.48 * cm
        y -= 0.4 * cm

    c.showPage(); c.save()
    return path
