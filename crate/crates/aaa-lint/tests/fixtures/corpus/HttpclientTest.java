import org.junit.Test;

public class HttpclientTest {
    @Test
    public void testHttpclient() {
        HttpClient client = new HttpClient();
        try { client.execute(); }
        catch (final ClientException e) {
            e.printStackTrace();}
        assertTrue(client.isDone());}
}
