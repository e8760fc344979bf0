import org.junit.Test;

public class ClientExceptionTest {
    @Test(expected = ClientException.class)
    public void testEmptyClientException() throws Exception {
        try(Client client =new Client("")){
            client.createProfile();}}
}
