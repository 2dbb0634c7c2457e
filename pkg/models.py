from sqlalchemy import JSON, Column, DateTime, Float, Integer, String
from sqlalchemy.sql import func

from db import Base


class VerificationRun(Base):
    __tablename__ = "verification_runs"

    id = Column(Integer, primary_key=True, index=True)
    program = Column(String, nullable=False, index=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now())

    exhaustive_len = Column(Integer, nullable=False)
    exhaustive_count = Column(Integer, nullable=False)
    sampled = Column(JSON, nullable=False)  # length -> strings sampled
    mismatches = Column(Integer, nullable=False)
    witnesses = Column(JSON, nullable=False)
    max_bool_error = Column(Float, nullable=False)
    max_count_error = Column(Float, nullable=False)
    bins = Column(JSON, nullable=False)  # "lo-hi" -> accuracy or null
    predict_mismatches = Column(Integer, nullable=False, default=0)
    seed = Column(Integer, nullable=False)
    runtime_s = Column(Float, nullable=True)

    @classmethod
    def from_report(cls, report) -> "VerificationRun":
        return cls(**report.as_dict(include_runtime=True))

    def as_dict(self) -> dict:
        return {
            "program": self.program,
            "exhaustive_len": self.exhaustive_len,
            "exhaustive_count": self.exhaustive_count,
            "sampled": self.sampled,
            "mismatches": self.mismatches,
            "witnesses": self.witnesses,
            "max_bool_error": self.max_bool_error,
            "max_count_error": self.max_count_error,
            "bins": self.bins,
            "predict_mismatches": self.predict_mismatches,
            "seed": self.seed,
        }
