import { FeedbackApi } from './api.js';
import { Session } from './session.js';

/* The page is usually served from a different port than the marking
 * service; data-api-base on <body> points at the service.  Served
 * from the same origin, the attribute can be dropped. */
const mount = document.getElementById('app');
if (mount) {
  const base = document.body.dataset.apiBase ?? '';
  void new Session(new FeedbackApi(base), mount).start();
}
