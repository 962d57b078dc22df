//! Built-in ISO 27001 essential-controls framework, grouped into the six
//! analysis domains. Each control carries a small set of representative
//! assessment issues; adopters can supply a fuller question bank as a
//! framework file.

use super::{FrameworkDefinition, FrameworkNode, GradingScale};

pub const ISO27001_ID: &str = "iso27001";

struct Control {
    clause: &'static str,
    name: &'static str,
    issues: &'static [&'static str],
}

struct Domain {
    id: &'static str,
    name: &'static str,
    iso_ref: Option<&'static str>,
    controls: &'static [Control],
}

const DOMAINS: &[Domain] = &[
    Domain {
        id: "policy",
        name: "Policy",
        iso_ref: Some("5"),
        controls: &[Control {
            clause: "5.1.1",
            name: "Information security policy document",
            issues: &[
                "Is an information security policy document approved by management?",
                "Has the policy been published and communicated to all employees and relevant external parties?",
                "Is the policy reviewed at planned intervals or when significant changes occur?",
            ],
        }],
    },
    Domain {
        id: "tools_technology",
        name: "Tools & Technology",
        iso_ref: Some("12"),
        controls: &[
            Control {
                clause: "12.2.1",
                name: "Input data validation",
                issues: &[
                    "Is data input to applications validated to ensure it is correct and appropriate?",
                    "Are out-of-range values, invalid characters and missing fields detected on input?",
                ],
            },
            Control {
                clause: "12.2.2",
                name: "Control of internal processing",
                issues: &[
                    "Are validation checks built into applications to detect corruption through processing errors?",
                    "Are failed or interrupted processing runs detected and recovered?",
                ],
            },
            Control {
                clause: "12.2.3",
                name: "Message integrity",
                issues: &[
                    "Are requirements for message authenticity and integrity identified for applications?",
                    "Are appropriate controls implemented to protect message integrity?",
                ],
            },
            Control {
                clause: "12.2.4",
                name: "Output data validation",
                issues: &[
                    "Is data output from applications validated to ensure processing of stored information is correct?",
                    "Are plausibility checks performed on output before it is released?",
                ],
            },
            Control {
                clause: "12.6.1",
                name: "Control of technical vulnerabilities",
                issues: &[
                    "Is timely information about technical vulnerabilities of systems obtained?",
                    "Is the organization's exposure to such vulnerabilities evaluated?",
                    "Are appropriate measures taken to address the associated risk?",
                ],
            },
        ],
    },
    Domain {
        id: "organization",
        name: "Organization",
        iso_ref: Some("6"),
        controls: &[Control {
            clause: "6.1.3",
            name: "Allocation of information security responsibilities",
            issues: &[
                "Are assets and security process clearly identified?",
                "Are all information security responsibilities clearly defined?",
                "Is the responsibility for each asset and security process assigned to a named owner?",
            ],
        }],
    },
    Domain {
        id: "culture",
        name: "Culture",
        iso_ref: None,
        controls: &[
            Control {
                clause: "13.2.1",
                name: "Responsibilities and procedures",
                issues: &[
                    "Are management responsibilities and procedures established for incident response?",
                    "Do incident procedures ensure a quick, effective and orderly response?",
                ],
            },
            Control {
                clause: "13.2.2",
                name: "Learning from information security incidents",
                issues: &[
                    "Are the types, volumes and costs of incidents quantified and monitored?",
                    "Is incident information used to identify recurring or high-impact incidents?",
                ],
            },
            Control {
                clause: "13.2.3",
                name: "Collection of evidence",
                issues: &[
                    "Is evidence collected, retained and presented according to the relevant jurisdiction's rules?",
                    "Are follow-up actions against persons or organizations supported by collected evidence?",
                ],
            },
            Control {
                clause: "14.1.1",
                name: "Including information security in the business continuity management process",
                issues: &[
                    "Is a managed process in place for business continuity throughout the organization?",
                    "Does the continuity process address the information security requirements needed?",
                ],
            },
            Control {
                clause: "14.1.2",
                name: "Business continuity and risk assessment",
                issues: &[
                    "Are events that can cause interruptions to business processes identified?",
                    "Are the probability and impact of such interruptions assessed?",
                ],
            },
            Control {
                clause: "14.1.3",
                name: "Developing and implementing continuity plans including information security",
                issues: &[
                    "Are plans developed to maintain or restore operations after interruption?",
                    "Do plans ensure availability of information at the required level and timescale?",
                ],
            },
            Control {
                clause: "14.1.4",
                name: "Business continuity planning framework",
                issues: &[
                    "Is a single framework of business continuity plans maintained?",
                    "Does the framework identify priorities for testing and maintenance?",
                ],
            },
            Control {
                clause: "14.1.5",
                name: "Testing, maintaining and re-assessing business continuity plans",
                issues: &[
                    "Are business continuity plans tested regularly?",
                    "Are plans updated so they remain up to date and effective?",
                ],
            },
        ],
    },
    Domain {
        id: "stakeholder",
        name: "Stakeholder",
        iso_ref: Some("8"),
        controls: &[
            Control {
                clause: "8.2.1",
                name: "Management responsibilities",
                issues: &[
                    "Does management require employees, contractors and third parties to apply security policies?",
                    "Are users briefed on their security roles before being granted access?",
                ],
            },
            Control {
                clause: "8.2.2",
                name: "Information security awareness, education and training",
                issues: &[
                    "Do all employees receive appropriate awareness training?",
                    "Are regular updates on organizational policies and procedures provided?",
                    "Is the effectiveness of awareness training measured?",
                ],
            },
            Control {
                clause: "8.2.3",
                name: "Disciplinary process",
                issues: &[
                    "Is there a formal disciplinary process for employees who commit a security breach?",
                    "Is the disciplinary process applied consistently and fairly?",
                ],
            },
        ],
    },
    Domain {
        id: "knowledge",
        name: "Knowledge",
        iso_ref: Some("15"),
        controls: &[
            Control {
                clause: "15.1.2",
                name: "Intellectual property rights",
                issues: &[
                    "Are procedures implemented to ensure compliance with intellectual property requirements?",
                    "Is the use of proprietary software products controlled and licensed?",
                ],
            },
            Control {
                clause: "15.1.3",
                name: "Protection of organizational records",
                issues: &[
                    "Are important records protected from loss, destruction and falsification?",
                    "Are retention schedules defined for record types?",
                ],
            },
            Control {
                clause: "15.1.4",
                name: "Data protection and privacy of personal information",
                issues: &[
                    "Is personal information protected as required by relevant legislation and regulations?",
                    "Is a data protection officer or equivalent responsibility assigned?",
                ],
            },
        ],
    },
];

/// The ISO 27001 essential-controls framework: six domains, 21 controls.
pub fn builtin_iso27001() -> FrameworkDefinition {
    let domains = DOMAINS
        .iter()
        .map(|d| {
            let controls = d
                .controls
                .iter()
                .map(|c| {
                    let control_id = format!("{}.{}", d.id, c.clause);
                    let issues = c
                        .issues
                        .iter()
                        .enumerate()
                        .map(|(i, q)| {
                            FrameworkNode::leaf(
                                format!("{control_id}.q{}", i + 1),
                                format!("{} issue {}", c.clause, i + 1),
                                Some(c.clause),
                                *q,
                            )
                        })
                        .collect();
                    FrameworkNode::aggregate(control_id, c.name, Some(c.clause), issues)
                })
                .collect();
            FrameworkNode::aggregate(d.id, d.name, d.iso_ref, controls)
        })
        .collect();

    FrameworkDefinition {
        id: ISO27001_ID.to_owned(),
        name: "ISO 27001 essential controls (six-domain framework)".to_owned(),
        version: "1.0".to_owned(),
        scale: GradingScale::default(),
        domains,
    }
}
