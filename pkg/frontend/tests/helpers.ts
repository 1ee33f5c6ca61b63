import { FormPayload, Verdict } from '../src/types';

/** Let queued promise callbacks and timers run. */
export const settle = () => new Promise<void>((resolve) => setTimeout(resolve, 0));

export function samplePayload(overrides: Partial<FormPayload> = {}): FormPayload {
  return {
    form_id: 'f-001',
    question: 'how many bars are there in Leith',
    statements: [
      {
        stype: 'QuestionType',
        display_text: 'the question asks for a count',
        payload: ['count'],
        token_span: [0, 1],
      },
      {
        stype: 'Town',
        display_text: 'the place is Leith',
        payload: [['name', 'Leith']],
        token_span: [4, 5, 6],
      },
      {
        stype: 'POI',
        display_text: 'it is about bars',
        payload: [['amenity', 'bar']],
        token_span: [2, 3],
      },
    ],
    tooltips: {
      count: 'the answer is a number of matches',
      'name=Leith': 'matches objects named Leith',
      'amenity=bar': 'drinking establishment',
    },
    served_at: 12345.0,
    ...overrides,
  };
}

/**
 * Offline restatement of how the service turns a marking into token
 * rewards: tokens inside a statement's span take that verdict, tokens
 * no statement covers are right only when everything is.
 */
export function recomputeRewards(payload: FormPayload, verdicts: Verdict[], nTokens: number) {
  const allYes = verdicts.every((v) => v === 'yes');
  const tokenRewards: number[] = Array(nTokens).fill(allYes ? 1 : 0);
  const covered = new Set<number>();
  payload.statements.forEach((statement, i) => {
    for (const t of statement.token_span) {
      tokenRewards[t] = verdicts[i] === 'yes' ? 1 : 0;
      covered.add(t);
    }
  });
  return {
    token_rewards: tokenRewards,
    seq_reward: allYes ? 1 : 0,
    covered: [...covered].sort((a, b) => a - b),
  };
}
