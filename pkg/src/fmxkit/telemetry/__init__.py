"""Telemetry payload model and traffic analysis."""

from .capture import (Allowlist, CaptureRecord, EndpointStats, RateReport,
                      analyze_capture, emit_block_rules, read_capture,
                      split_destination, synthetic_capture, write_capture)
from .endpoint import EndpointConfig, Emission, ReportScheduler, ServerUri
from .report import (REPORT_CMD, Battery, Imu, Motor, ReportState, Resource,
                     ServiceStatus, parse_report, report_from_dict,
                     report_to_dict, sample_report_text, synthesize_report)

__all__ = [
    "Allowlist", "CaptureRecord", "EndpointStats", "RateReport", "analyze_capture",
    "emit_block_rules", "read_capture", "split_destination", "synthetic_capture",
    "write_capture", "EndpointConfig", "Emission", "ReportScheduler", "ServerUri",
    "REPORT_CMD", "Battery", "Imu", "Motor", "ReportState", "Resource", "ServiceStatus",
    "parse_report", "report_from_dict", "report_to_dict", "sample_report_text",
    "synthesize_report",
]
